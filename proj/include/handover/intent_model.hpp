#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "handover/geometry.hpp"
#include "handover/heatmap.hpp"

namespace handover {

/// Layer sizes of the recurrent encoder / transposed-convolution decoder.
///
/// The GRU hidden state is projected to `proj_channels` x base_x x base_y,
/// upsampled by one transposed convolution (stride 2) to `deconv_channels`
/// maps, cropped to n x m, reduced by a 1x1 convolution and squashed by a
/// sigmoid. base_x/base_y are the smallest sizes whose upsampled output covers
/// the grid; for the 5 x 10 grid they are 3 x 5.
struct ModelShape {
  int input_dim = kFeatureDim;
  int hidden_dim = 64;
  int proj_channels = 16;
  int deconv_channels = 8;
  int kernel_x = 3;
  int kernel_y = 4;
  int stride = 2;
  int padding = 1;
  GridSpec grid;

  int base_x() const;
  int base_y() const;
  void validate() const;
};

struct TensorInfo {
  std::string name;
  std::vector<int> dims;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Parameters live in one flat buffer; `layout()` names the slices in the
/// fixed order they are serialized.
class IntentModel {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  IntentModel() = default;
  /// All parameters zero.
  explicit IntentModel(const ModelShape& shape);
  /// Seeded uniform fan-in initialization.
  static IntentModel initialized(const ModelShape& shape, std::uint64_t seed);

  const ModelShape& shape() const { return shape_; }
  const GridSpec& grid() const { return shape_.grid; }
  const std::vector<TensorInfo>& layout() const { return layout_; }
  const TensorInfo& tensor(const std::string& name) const;

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  void save(const std::filesystem::path& path) const;
  static IntentModel load(const std::filesystem::path& path);

 private:
  ModelShape shape_;
  std::vector<TensorInfo> layout_;
  std::vector<double> params_;
};

using HiddenState = std::vector<double>;

struct StepOutput {
  Heatmap heatmap;
  HiddenState hidden;
};

/// One GRU step plus decoding. `hidden == nullptr` starts a new sequence from
/// a zero state. Throws DimensionMismatch.
StepOutput forward(const IntentModel& model, std::span<const double> input,
                   const HiddenState* hidden);

/// Runs a whole sequence from a zero state.
std::vector<Heatmap> forward_sequence(const IntentModel& model,
                                      std::span<const FeatureVector> inputs);

/// One training example: the model inputs of a trajectory and the per-step labels.
struct TrainingSequence {
  std::vector<FeatureVector> inputs;
  std::vector<Heatmap> labels;
};

/// sequence_loss of the model on `seq` and, when `grad` is non-empty, its
/// gradient w.r.t. every parameter accumulated into `grad` (full BPTT).
double sequence_loss_and_gradient(const IntentModel& model, const TrainingSequence& seq,
                                  std::span<double> grad);

}  // namespace handover
