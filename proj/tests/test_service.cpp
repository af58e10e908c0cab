#include <memory>
#include <random>
#include <string>
#include <vector>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"
#include "handover/session.hpp"
#include "handover/ws_server.hpp"
#include "json.hpp"

using namespace handover;
using nlohmann::json;

namespace {

json frame_json(const RawFrame& f) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(f.head_rot(r, c));
  }
  return {{"type", "frame"},
          {"t", f.t},
          {"palm", {f.palm.x(), f.palm.y(), f.palm.z()}},
          {"elbow", {f.elbow.x(), f.elbow.y(), f.elbow.z()}},
          {"shoulder", {f.shoulder.x(), f.shoulder.y(), f.shoulder.z()}},
          {"head_pos", {f.head_pos.x(), f.head_pos.y(), f.head_pos.z()}},
          {"head_rot", rot}};
}

std::string place_json(const Vec2& p, double t) {
  return json{{"type", "place"}, {"point", {p.x(), p.y()}}, {"t", t}}.dump();
}

HumanTrajectory trajectory(std::uint64_t seed, const Cell& cell) {
  std::mt19937_64 rng(seed);
  return gen_trajectory(rng, GridSpec{}, cell, SimConfig{});
}

std::shared_ptr<IntentModel> small_model(std::uint64_t seed = 3) {
  ModelShape shape;
  shape.hidden_dim = 16;
  return std::make_shared<IntentModel>(IntentModel::initialized(shape, seed));
}

std::vector<json> parse_all(const std::vector<std::string>& replies) {
  std::vector<json> out;
  for (const auto& r : replies) out.push_back(json::parse(r));
  return out;
}

// Streams a whole trajectory and the placement through a session.
std::vector<json> replay(Session& s, const HumanTrajectory& traj, double place_t) {
  std::vector<json> all;
  for (const auto& f : traj.frames) {
    for (auto& j : parse_all(s.handle(frame_json(f).dump()))) all.push_back(std::move(j));
  }
  for (auto& j : parse_all(s.handle(place_json(traj.target_point, place_t)))) all.push_back(std::move(j));
  return all;
}

}  // namespace

TEST_CASE("reactive session messages") {
  TrialConfig cfg;
  Session s("a", Mode::Reactive, nullptr, cfg, 1);
  const auto traj = trajectory(5, {1, 6});
  for (const auto& f : traj.frames) {
    const auto out = parse_all(s.handle(frame_json(f).dump()));
    REQUIRE(out.size() == 1);
    CHECK(out[0]["type"] == "robot");
    CHECK(out[0]["action"] == "idle");
    CHECK(out[0]["goal"].is_null());
    CHECK(out[0]["gripper"] == "open");
    CHECK(out[0]["pose"].size() == 3);
  }
  const double place_t = traj.release_time + 0.1;
  const auto out = parse_all(s.handle(place_json(traj.target_point, place_t)));
  REQUIRE(out.size() >= 3);
  CHECK(out.front()["type"] == "robot");
  CHECK(out.front()["action"] == "definitive");
  CHECK(out.front()["goal"] == json::array({1, 6}));
  const auto& last_robot = out[out.size() - 2];
  CHECK(last_robot["gripper"] == "closed");
  CHECK(last_robot["action"] == "grasped");
  const auto& metrics = out.back();
  CHECK(metrics["type"] == "metrics");
  CHECK(metrics["response_time"].get<double>() == doctest::Approx(place_t));
  CHECK(metrics["start_to_grab"].get<double>() > place_t);
  CHECK(metrics["error_grids"].is_null());
  for (const auto& m : out) CHECK(m.value("preempted", false) == false);

  // frames after the grasp just report the parked arm
  const auto after = parse_all(s.handle(frame_json(RawFrame{place_t + 5.0}).dump()));
  REQUIRE(after.size() == 1);
  CHECK(after[0]["action"] == "grasped");
}

TEST_CASE("preemptive session heatmaps") {
  TrialConfig cfg;
  auto model = small_model();
  Session s("p", Mode::Preemptive, model.get(), cfg, 1);
  const auto traj = trajectory(8, {3, 2});
  const auto out = parse_all(s.handle(frame_json(traj.frames[0]).dump()));
  REQUIRE(out.size() == 2);
  CHECK(out[0]["type"] == "heatmap");
  CHECK(out[0]["values"].size() == 5);
  for (const auto& row : out[0]["values"]) {
    CHECK(row.size() == 10);
    for (const auto& v : row) {
      CHECK(v.get<double>() > 0.0);
      CHECK(v.get<double>() < 1.0);
    }
  }
  CHECK(out[0]["fused"].size() == 5);
  const auto& pk = out[0]["peak"];
  CHECK(pk["cell"].size() == 2);
  // the reported peak is the largest fused value
  double best = 0.0;
  for (const auto& row : out[0]["fused"]) {
    for (const auto& v : row) best = std::max(best, v.get<double>());
  }
  CHECK(pk["p"].get<double>() == best);
  CHECK(out[1]["type"] == "robot");
}

TEST_CASE("session replay matches the offline trial") {
  TrialConfig cfg;
  auto model = small_model(11);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Cell cell{static_cast<int>(seed % 5), static_cast<int>((4 * seed + 1) % 10)};
    const auto traj = trajectory(50 + seed, cell);
    for (Mode mode : {Mode::Reactive, Mode::Preemptive}) {
      ModelPredictor predictor(*model);
      const auto offline = run_trial(traj, mode, &predictor, cfg, seed);
      Session s("r", mode, model.get(), cfg, seed);
      const auto out = replay(s, traj, traj.release_time + cfg.sim.detection_latency);
      const auto& metrics = out.back();
      REQUIRE(metrics["type"] == "metrics");
      CHECK(metrics["response_time"].get<double>() ==
            doctest::Approx(offline.response_time).epsilon(1e-12));
      CHECK(metrics["start_to_grab"].get<double>() ==
            doctest::Approx(offline.start_to_grab).epsilon(1e-12));
      if (offline.prediction_error) {
        CHECK(metrics["error_grids"].get<double>() == offline.prediction_error->euclid);
      } else {
        CHECK(metrics["error_grids"].is_null());
      }
    }
  }
}

TEST_CASE("placing at the predicted cell does not preempt") {
  TrialConfig cfg;
  auto model = small_model(2);
  Session s("k", Mode::Preemptive, model.get(), cfg, 4);
  const auto traj = trajectory(21, {2, 5});
  std::optional<Cell> goal;
  for (const auto& f : traj.frames) {
    for (const auto& m : parse_all(s.handle(frame_json(f).dump()))) {
      if (m["type"] == "robot" && !m["goal"].is_null()) goal = Cell{m["goal"][0].get<int>(), m["goal"][1].get<int>()};
    }
  }
  REQUIRE(goal.has_value());
  const auto out = parse_all(s.handle(place_json(cfg.grid.cell_center(*goal), traj.release_time + 0.1)));
  for (const auto& m : out) {
    if (m["type"] == "robot") CHECK(m["preempted"] == false);
  }
  CHECK(out.back()["type"] == "metrics");
  CHECK(out.back()["error_grids"].get<double>() == 0.0);
}

TEST_CASE("malformed messages get an error reply and change nothing") {
  TrialConfig cfg;
  Session s("m", Mode::Reactive, nullptr, cfg, 1);
  const auto traj = trajectory(2, {0, 0});
  s.handle(frame_json(traj.frames[0]).dump());
  json no_rot = frame_json(traj.frames[1]);
  no_rot.erase("head_rot");
  json skewed = frame_json(traj.frames[1]);
  skewed["head_rot"] = {1, 0, 0, 0, 1, 0, 0, 0, 2};
  json stale = frame_json(traj.frames[0]);
  const std::vector<std::string> bad{
      "",
      "not json",
      "[]",
      "{}",
      R"({"type": 3})",
      R"({"type": "dance"})",
      R"({"type": "frame"})",
      no_rot.dump(),
      skewed.dump(),
      stale.dump(),
      R"({"type": "place", "point": [0.1]})",
      R"({"type": "place", "point": "here"})",
      R"({"type": "place", "point": [9.0, 9.0]})",
      R"({"type": "reset", "mode": "preemptive"})",
      R"({"type": "reset", "mode": "sideways"})",
  };
  std::mt19937_64 rng(4);
  std::vector<std::string> cases = bad;
  // plus random byte soup
  for (int i = 0; i < 200; ++i) {
    std::string junk(1 + rng() % 40, ' ');
    for (auto& c : junk) c = static_cast<char>(rng() % 256);
    cases.push_back(junk);
  }
  for (const auto& msg : cases) {
    const auto out = parse_all(s.handle(msg));
    REQUIRE(out.size() == 1);
    CHECK(out[0]["type"] == "error");
    CHECK(out[0]["detail"].is_string());
  }
  const auto detail = json::parse(s.handle("not json")[0])["detail"].get<std::string>();
  CHECK(detail.rfind("MalformedMessage: ", 0) == 0);
  // the session still works
  CHECK(s.frames() == 1);
  const auto ok = parse_all(s.handle(frame_json(traj.frames[1]).dump()));
  REQUIRE(ok.size() == 1);
  CHECK(ok[0]["type"] == "robot");
}

TEST_CASE("reset and close") {
  TrialConfig cfg;
  auto model = small_model();
  Session s("r", Mode::Reactive, model.get(), cfg, 1);
  const auto traj = trajectory(9, {4, 9});
  replay(s, traj, traj.release_time + 0.1);
  CHECK(s.placed());
  const auto out = parse_all(s.handle(R"({"type": "reset", "mode": "preemptive"})"));
  REQUIRE(out.size() == 1);
  CHECK(out[0]["action"] == "idle");
  CHECK(s.mode() == Mode::Preemptive);
  CHECK_FALSE(s.placed());
  CHECK(s.handle(R"({"type": "close"})").empty());
  CHECK(s.closed());
  CHECK(json::parse(s.handle(frame_json(traj.frames[0]).dump())[0])["type"] == "error");
}

TEST_CASE("session manager") {
  TrialConfig cfg;
  SessionManager none(nullptr, cfg, 1);
  CHECK_THROWS_AS(none.open(Mode::Preemptive), Error);
  const auto id = none.open(Mode::Reactive);
  CHECK(id == "s1");  // a failed open does not use up an id
  CHECK(none.size() == 1);
  try {
    none.handle("s99", R"({"type": "close"})");
    FAIL("expected UnknownSession");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownSession);
  }

  TrialConfig other = cfg;
  other.grid.n = 4;
  SessionManager mismatched(small_model(), other, 1);
  CHECK_THROWS_AS(mismatched.open(Mode::Reactive), Error);

  // two sessions interleaved give the same replies as each run alone
  SessionManager mgr(small_model(), cfg, 7);
  const auto a = mgr.open(Mode::Preemptive);
  const auto b = mgr.open(Mode::Reactive);
  const auto ta = trajectory(30, {1, 1}), tb = trajectory(31, {3, 8});
  std::vector<std::string> got_a, got_b;
  for (std::size_t k = 0; k < std::max(ta.frames.size(), tb.frames.size()); ++k) {
    if (k < ta.frames.size()) for (auto& r : mgr.handle(a, frame_json(ta.frames[k]).dump())) got_a.push_back(r);
    if (k < tb.frames.size()) for (auto& r : mgr.handle(b, frame_json(tb.frames[k]).dump())) got_b.push_back(r);
  }
  SessionManager solo(small_model(), cfg, 7);
  const auto sa = solo.open(Mode::Preemptive);
  const auto sb = solo.open(Mode::Reactive);
  std::vector<std::string> want_a, want_b;
  for (const auto& f : ta.frames) for (auto& r : solo.handle(sa, frame_json(f).dump())) want_a.push_back(r);
  for (const auto& f : tb.frames) for (auto& r : solo.handle(sb, frame_json(f).dump())) want_b.push_back(r);
  CHECK(got_a == want_a);
  CHECK(got_b == want_b);
  mgr.handle(a, R"({"type": "close"})");
  CHECK(mgr.closed(a));
  CHECK_FALSE(mgr.closed(b));
  mgr.close(a);
  CHECK(mgr.size() == 1);
}

TEST_CASE("websocket round trip") {
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  TrialConfig cfg;
  auto sessions = std::make_shared<SessionManager>(nullptr, cfg, 3);
  ServerConfig sc;
  sc.port = 0;
  WsServer server(sessions, sc);
  server.start();
  REQUIRE(server.port() != 0);

  boost::asio::io_context ioc;
  tcp::resolver resolver(ioc);
  websocket::stream<tcp::socket> ws(ioc);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/");
  ws.text(true);

  auto read_json = [&] {
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  };

  const auto traj = trajectory(12, {2, 2});
  for (const auto& f : traj.frames) {
    ws.write(boost::asio::buffer(frame_json(f).dump()));
    const auto reply = read_json();
    CHECK(reply["type"] == "robot");  // no model: the server falls back to reactive
  }
  ws.write(boost::asio::buffer(std::string("garbage")));
  CHECK(read_json()["type"] == "error");

  ws.write(boost::asio::buffer(place_json(traj.target_point, traj.release_time + 0.1)));
  json msg;
  do {
    msg = read_json();
  } while (msg["type"] == "robot");
  CHECK(msg["type"] == "metrics");
  CHECK(msg["start_to_grab"].get<double>() > msg["response_time"].get<double>());

  ws.write(boost::asio::buffer(std::string(R"({"type": "close"})")));
  beast::flat_buffer buf;
  beast::error_code ec;
  ws.read(buf, ec);
  CHECK(ec == websocket::error::closed);
  server.stop();
}
