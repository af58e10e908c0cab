#include "handover/intent_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "handover/labels.hpp"

namespace handover {

namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

int covering_input(int out, int kernel, int stride, int padding) {
  int in = 1;
  while ((in - 1) * stride - 2 * padding + kernel < out) ++in;
  return in;
}

// y += W x with W row-major rows x cols.
void gemv_acc(const double* w, int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y += W^T g.
void gemv_t_acc(const double* w, int rows, int cols, const double* g, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + static_cast<std::size_t>(r) * cols;
    const double gr = g[r];
    if (gr == 0.0) continue;
    for (int c = 0; c < cols; ++c) y[c] += row[c] * gr;
  }
}

// dW += g x^T.
void outer_acc(const double* g, int rows, const double* x, int cols, double* dw) {
  for (int r = 0; r < rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* row = dw + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

// Views into the flat parameter (or gradient) buffer.
template <class T>
struct Params {
  T* wz; T* wr; T* wn;
  T* uz; T* ur; T* un;
  T* bz; T* br; T* bn;
  T* proj_w; T* proj_b;
  T* deconv_w; T* deconv_b;
  T* out_w; T* out_b;
};

template <class T>
Params<T> bind(const IntentModel& model, T* base) {
  auto at = [&](const char* name) { return base + model.tensor(name).offset; };
  return {at("gru.w_z"),  at("gru.w_r"),    at("gru.w_n"),    at("gru.u_z"),
          at("gru.u_r"),  at("gru.u_n"),    at("gru.b_z"),    at("gru.b_r"),
          at("gru.b_n"),  at("dec.proj_w"), at("dec.proj_b"), at("dec.deconv_w"),
          at("dec.deconv_b"), at("dec.out_w"), at("dec.out_b")};
}

struct Dims {
  int in, hid, pc, dc, bx, by, kx, ky, stride, pad, n, m;
  int proj() const { return pc * bx * by; }
  int cells() const { return n * m; }
};

Dims dims_of(const ModelShape& s) {
  return {s.input_dim, s.hidden_dim, s.proj_channels, s.deconv_channels, s.base_x(), s.base_y(),
          s.kernel_x,  s.kernel_y,   s.stride,        s.padding,         s.grid.n,   s.grid.m};
}

struct StepCache {
  std::vector<double> x, h_prev, z, r, cand, h;
  std::vector<double> proj;    // post-ReLU
  std::vector<double> deconv;  // post-ReLU, dc x n x m
  std::vector<double> out;     // sigmoid, n x m
};

void step_forward(const Dims& d, const Params<const double>& p, std::span<const double> input,
                  std::span<const double> h_prev, StepCache& c) {
  const int H = d.hid;
  c.x.assign(input.begin(), input.end());
  c.h_prev.assign(h_prev.begin(), h_prev.end());

  c.z.assign(p.bz, p.bz + H);
  gemv_acc(p.wz, H, d.in, c.x.data(), c.z.data());
  gemv_acc(p.uz, H, H, c.h_prev.data(), c.z.data());
  c.r.assign(p.br, p.br + H);
  gemv_acc(p.wr, H, d.in, c.x.data(), c.r.data());
  gemv_acc(p.ur, H, H, c.h_prev.data(), c.r.data());
  for (int i = 0; i < H; ++i) {
    c.z[i] = sigmoid(c.z[i]);
    c.r[i] = sigmoid(c.r[i]);
  }
  std::vector<double> rh(H);
  for (int i = 0; i < H; ++i) rh[i] = c.r[i] * c.h_prev[i];
  c.cand.assign(p.bn, p.bn + H);
  gemv_acc(p.wn, H, d.in, c.x.data(), c.cand.data());
  gemv_acc(p.un, H, H, rh.data(), c.cand.data());
  c.h.resize(H);
  for (int i = 0; i < H; ++i) {
    c.cand[i] = std::tanh(c.cand[i]);
    c.h[i] = (1.0 - c.z[i]) * c.h_prev[i] + c.z[i] * c.cand[i];
  }

  const int P = d.proj();
  c.proj.assign(p.proj_b, p.proj_b + P);
  gemv_acc(p.proj_w, P, H, c.h.data(), c.proj.data());
  for (double& v : c.proj) v = std::max(v, 0.0);

  const int cells = d.cells();
  c.deconv.assign(static_cast<std::size_t>(d.dc) * cells, 0.0);
  for (int co = 0; co < d.dc; ++co) {
    std::fill_n(c.deconv.begin() + static_cast<std::ptrdiff_t>(co) * cells, cells, p.deconv_b[co]);
  }
  for (int ci = 0; ci < d.pc; ++ci) {
    for (int ix = 0; ix < d.bx; ++ix) {
      for (int iy = 0; iy < d.by; ++iy) {
        const double v = c.proj[(ci * d.bx + ix) * d.by + iy];
        if (v == 0.0) continue;
        for (int kx = 0; kx < d.kx; ++kx) {
          const int ox = ix * d.stride - d.pad + kx;
          if (ox < 0 || ox >= d.n) continue;
          for (int ky = 0; ky < d.ky; ++ky) {
            const int oy = iy * d.stride - d.pad + ky;
            if (oy < 0 || oy >= d.m) continue;
            const int cell = ox * d.m + oy;
            for (int co = 0; co < d.dc; ++co) {
              const double k = p.deconv_w[((ci * d.dc + co) * d.kx + kx) * d.ky + ky];
              c.deconv[static_cast<std::size_t>(co) * cells + cell] += v * k;
            }
          }
        }
      }
    }
  }
  for (double& v : c.deconv) v = std::max(v, 0.0);

  c.out.assign(cells, p.out_b[0]);
  for (int co = 0; co < d.dc; ++co) {
    const double w = p.out_w[co];
    const double* src = c.deconv.data() + static_cast<std::size_t>(co) * cells;
    for (int i = 0; i < cells; ++i) c.out[i] += w * src[i];
  }
  for (double& v : c.out) v = sigmoid(v);
}

// Backpropagates d(loss)/d(out) of one step and the incoming d(loss)/d(h) from
// the following step; accumulates parameter gradients and returns d/d(h_prev).
std::vector<double> step_backward(const Dims& d, const Params<const double>& p,
                                  const Params<double>& g, const StepCache& c,
                                  std::span<const double> d_out, std::vector<double> d_h) {
  const int H = d.hid;
  const int cells = d.cells();
  const int P = d.proj();

  std::vector<double> d_logit(cells);
  for (int i = 0; i < cells; ++i) d_logit[i] = d_out[i] * c.out[i] * (1.0 - c.out[i]);

  std::vector<double> d_deconv(static_cast<std::size_t>(d.dc) * cells, 0.0);
  for (int i = 0; i < cells; ++i) g.out_b[0] += d_logit[i];
  for (int co = 0; co < d.dc; ++co) {
    const double* act = c.deconv.data() + static_cast<std::size_t>(co) * cells;
    double* dd = d_deconv.data() + static_cast<std::size_t>(co) * cells;
    double acc = 0.0;
    for (int i = 0; i < cells; ++i) {
      acc += d_logit[i] * act[i];
      dd[i] = act[i] > 0.0 ? d_logit[i] * p.out_w[co] : 0.0;
    }
    g.out_w[co] += acc;
  }

  for (int co = 0; co < d.dc; ++co) {
    const double* dd = d_deconv.data() + static_cast<std::size_t>(co) * cells;
    double acc = 0.0;
    for (int i = 0; i < cells; ++i) acc += dd[i];
    g.deconv_b[co] += acc;
  }
  std::vector<double> d_proj(P, 0.0);
  for (int ci = 0; ci < d.pc; ++ci) {
    for (int ix = 0; ix < d.bx; ++ix) {
      for (int iy = 0; iy < d.by; ++iy) {
        const int pi = (ci * d.bx + ix) * d.by + iy;
        const double v = c.proj[pi];
        double acc = 0.0;
        for (int kx = 0; kx < d.kx; ++kx) {
          const int ox = ix * d.stride - d.pad + kx;
          if (ox < 0 || ox >= d.n) continue;
          for (int ky = 0; ky < d.ky; ++ky) {
            const int oy = iy * d.stride - d.pad + ky;
            if (oy < 0 || oy >= d.m) continue;
            const int cell = ox * d.m + oy;
            for (int co = 0; co < d.dc; ++co) {
              const std::size_t ki = ((ci * d.dc + co) * d.kx + kx) * d.ky + ky;
              const double grad = d_deconv[static_cast<std::size_t>(co) * cells + cell];
              acc += grad * p.deconv_w[ki];
              g.deconv_w[ki] += grad * v;
            }
          }
        }
        d_proj[pi] = v > 0.0 ? acc : 0.0;
      }
    }
  }

  for (int i = 0; i < P; ++i) g.proj_b[i] += d_proj[i];
  outer_acc(d_proj.data(), P, c.h.data(), H, g.proj_w);
  gemv_t_acc(p.proj_w, P, H, d_proj.data(), d_h.data());

  std::vector<double> d_hprev(H), d_az(H), d_ar(H), d_an(H), rh(H), d_rh(H, 0.0);
  for (int i = 0; i < H; ++i) {
    const double dc = d_h[i] * c.z[i];
    const double dz = d_h[i] * (c.cand[i] - c.h_prev[i]);
    d_hprev[i] = d_h[i] * (1.0 - c.z[i]);
    d_an[i] = dc * (1.0 - c.cand[i] * c.cand[i]);
    d_az[i] = dz * c.z[i] * (1.0 - c.z[i]);
    rh[i] = c.r[i] * c.h_prev[i];
  }
  outer_acc(d_an.data(), H, c.x.data(), d.in, g.wn);
  outer_acc(d_an.data(), H, rh.data(), H, g.un);
  for (int i = 0; i < H; ++i) g.bn[i] += d_an[i];
  gemv_t_acc(p.un, H, H, d_an.data(), d_rh.data());
  for (int i = 0; i < H; ++i) {
    d_hprev[i] += d_rh[i] * c.r[i];
    const double dr = d_rh[i] * c.h_prev[i];
    d_ar[i] = dr * c.r[i] * (1.0 - c.r[i]);
  }
  outer_acc(d_ar.data(), H, c.x.data(), d.in, g.wr);
  outer_acc(d_ar.data(), H, c.h_prev.data(), H, g.ur);
  outer_acc(d_az.data(), H, c.x.data(), d.in, g.wz);
  outer_acc(d_az.data(), H, c.h_prev.data(), H, g.uz);
  for (int i = 0; i < H; ++i) {
    g.br[i] += d_ar[i];
    g.bz[i] += d_az[i];
  }
  gemv_t_acc(p.ur, H, H, d_ar.data(), d_hprev.data());
  gemv_t_acc(p.uz, H, H, d_az.data(), d_hprev.data());
  return d_hprev;
}

std::vector<TensorInfo> make_layout(const ModelShape& s) {
  const int H = s.hidden_dim, I = s.input_dim;
  const int P = s.proj_channels * s.base_x() * s.base_y();
  std::vector<TensorInfo> layout = {
      {"gru.w_z", {H, I}},
      {"gru.w_r", {H, I}},
      {"gru.w_n", {H, I}},
      {"gru.u_z", {H, H}},
      {"gru.u_r", {H, H}},
      {"gru.u_n", {H, H}},
      {"gru.b_z", {H}},
      {"gru.b_r", {H}},
      {"gru.b_n", {H}},
      {"dec.proj_w", {P, H}},
      {"dec.proj_b", {P}},
      {"dec.deconv_w", {s.proj_channels, s.deconv_channels, s.kernel_x, s.kernel_y}},
      {"dec.deconv_b", {s.deconv_channels}},
      {"dec.out_w", {s.deconv_channels}},
      {"dec.out_b", {1}},
  };
  std::size_t offset = 0;
  for (auto& t : layout) {
    t.size = 1;
    for (int dim : t.dims) t.size *= static_cast<std::size_t>(dim);
    t.offset = offset;
    offset += t.size;
  }
  return layout;
}

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorCode::ParseError, "model file truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr char kMagic[4] = {'H', 'O', 'I', 'M'};

}  // namespace

int ModelShape::base_x() const { return covering_input(grid.n, kernel_x, stride, padding); }
int ModelShape::base_y() const { return covering_input(grid.m, kernel_y, stride, padding); }

void ModelShape::validate() const {
  grid.validate();
  if (input_dim < 1 || hidden_dim < 1 || proj_channels < 1 || deconv_channels < 1 ||
      kernel_x < 1 || kernel_y < 1 || stride < 1 || padding < 0) {
    throw Error(ErrorCode::InvalidConfig, "model dimensions must be positive");
  }
}

IntentModel::IntentModel(const ModelShape& shape) : shape_(shape) {
  shape_.validate();
  layout_ = make_layout(shape_);
  params_.assign(layout_.back().offset + layout_.back().size, 0.0);
}

IntentModel IntentModel::initialized(const ModelShape& shape, std::uint64_t seed) {
  IntentModel model(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&](const char* name, double bound) {
    const auto& t = model.tensor(name);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < t.size; ++i) model.params_[t.offset + i] = dist(rng);
  };
  const double gru = 1.0 / std::sqrt(static_cast<double>(shape.hidden_dim));
  for (const char* name : {"gru.w_z", "gru.w_r", "gru.w_n", "gru.u_z", "gru.u_r", "gru.u_n",
                           "gru.b_z", "gru.b_r", "gru.b_n"}) {
    fill(name, gru);
  }
  fill("dec.proj_w", std::sqrt(6.0 / (shape.hidden_dim + shape.proj_channels * shape.base_x() *
                                                               shape.base_y())));
  fill("dec.deconv_w",
       1.0 / std::sqrt(static_cast<double>(shape.proj_channels * shape.kernel_x * shape.kernel_y) /
                       (shape.stride * shape.stride)));
  fill("dec.out_w", 1.0 / std::sqrt(static_cast<double>(shape.deconv_channels)));
  // Start below the label mean so untrained maps are mostly dark.
  model.params_[model.tensor("dec.out_b").offset] = -2.0;
  return model;
}

const TensorInfo& IntentModel::tensor(const std::string& name) const {
  for (const auto& t : layout_) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown tensor " + name);
}

void IntentModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(os, kFormatVersion);
  for (int v : {shape_.input_dim, shape_.hidden_dim, shape_.grid.n, shape_.grid.m}) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  }
  put_le<double>(os, shape_.grid.cell_size);
  put_le<double>(os, shape_.grid.origin.x());
  put_le<double>(os, shape_.grid.origin.y());
  for (int v : {shape_.proj_channels, shape_.deconv_channels, shape_.kernel_x, shape_.kernel_y,
                shape_.stride, shape_.padding}) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  }
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(layout_.size()));
  for (const auto& t : layout_) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.dims.size()));
    for (int dim : t.dims) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(dim));
  }
  for (double v : params_) put_le<double>(os, v);
  if (!os) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

IntentModel IntentModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::ParseError, "not a model file: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::ParseError, "unsupported model format version " + std::to_string(version));
  }
  ModelShape shape;
  shape.input_dim = static_cast<int>(get_le<std::uint32_t>(is));
  shape.hidden_dim = static_cast<int>(get_le<std::uint32_t>(is));
  shape.grid.n = static_cast<int>(get_le<std::uint32_t>(is));
  shape.grid.m = static_cast<int>(get_le<std::uint32_t>(is));
  shape.grid.cell_size = get_le<double>(is);
  const double ox = get_le<double>(is);
  const double oy = get_le<double>(is);
  shape.grid.origin = Vec2(ox, oy);
  shape.proj_channels = static_cast<int>(get_le<std::uint32_t>(is));
  shape.deconv_channels = static_cast<int>(get_le<std::uint32_t>(is));
  shape.kernel_x = static_cast<int>(get_le<std::uint32_t>(is));
  shape.kernel_y = static_cast<int>(get_le<std::uint32_t>(is));
  shape.stride = static_cast<int>(get_le<std::uint32_t>(is));
  shape.padding = static_cast<int>(get_le<std::uint32_t>(is));

  IntentModel model(shape);
  const auto count = get_le<std::uint32_t>(is);
  if (count != model.layout_.size()) throw Error(ErrorCode::ParseError, "tensor count mismatch");
  for (const auto& t : model.layout_) {
    const auto rank = get_le<std::uint32_t>(is);
    if (rank != t.dims.size()) throw Error(ErrorCode::ParseError, "rank mismatch for " + t.name);
    for (int dim : t.dims) {
      if (get_le<std::uint32_t>(is) != static_cast<std::uint32_t>(dim)) {
        throw Error(ErrorCode::ParseError, "shape mismatch for " + t.name);
      }
    }
  }
  for (double& v : model.params_) v = get_le<double>(is);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::ParseError, "trailing bytes in model file");
  }
  return model;
}

StepOutput forward(const IntentModel& model, std::span<const double> input,
                   const HiddenState* hidden) {
  const Dims d = dims_of(model.shape());
  if (static_cast<int>(input.size()) != d.in) {
    throw Error(ErrorCode::DimensionMismatch, "input length " + std::to_string(input.size()) +
                                                  " != " + std::to_string(d.in));
  }
  HiddenState zero;
  if (!hidden) {
    zero.assign(d.hid, 0.0);
    hidden = &zero;
  } else if (static_cast<int>(hidden->size()) != d.hid) {
    throw Error(ErrorCode::DimensionMismatch, "hidden state length mismatch");
  }
  StepCache cache;
  step_forward(d, bind(model, model.params().data()), input, *hidden, cache);
  return {Heatmap(model.grid(), std::move(cache.out)), std::move(cache.h)};
}

std::vector<Heatmap> forward_sequence(const IntentModel& model,
                                      std::span<const FeatureVector> inputs) {
  std::vector<Heatmap> out;
  out.reserve(inputs.size());
  HiddenState h;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto step = forward(model, inputs[t], t == 0 ? nullptr : &h);
    out.push_back(std::move(step.heatmap));
    h = std::move(step.hidden);
  }
  return out;
}

double sequence_loss_and_gradient(const IntentModel& model, const TrainingSequence& seq,
                                  std::span<double> grad) {
  if (seq.inputs.size() != seq.labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "inputs and labels differ in length");
  }
  const Dims d = dims_of(model.shape());
  const auto params = bind(model, model.params().data());
  const std::size_t T = seq.inputs.size();

  std::vector<StepCache> caches(T);
  std::vector<double> h(d.hid, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    if (!(seq.labels[t].grid() == model.grid())) {
      throw Error(ErrorCode::ShapeMismatch, "label grid does not match model grid");
    }
    step_forward(d, params, seq.inputs[t], h, caches[t]);
    h = caches[t].h;
  }

  double loss = 0.0;
  std::vector<std::vector<double>> d_out(T, std::vector<double>(d.cells()));
  for (std::size_t t = 0; t < T; ++t) {
    const double c = confidence_weight(static_cast<double>(t), static_cast<double>(T));
    const auto label = seq.labels[t].values();
    double step = 0.0;
    for (int i = 0; i < d.cells(); ++i) {
      const double diff = caches[t].out[i] - label[i];
      step += diff * diff;
      d_out[t][i] = 2.0 * c * diff;
    }
    loss += c * step;
  }
  if (grad.empty()) return loss;
  if (grad.size() != model.param_count()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient buffer size mismatch");
  }

  const auto g = bind(model, grad.data());
  std::vector<double> d_h(d.hid, 0.0);
  for (std::size_t t = T; t-- > 0;) {
    d_h = step_backward(d, params, g, caches[t], d_out[t], std::move(d_h));
  }
  return loss;
}

}  // namespace handover
