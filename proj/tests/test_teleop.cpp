#include <doctest.h>

#include "teleop_helpers.hpp"
#include "tdlfd/error.hpp"

using namespace tdlfd;
using nlohmann::json;

namespace {

Environment eight_env(const ResourceResolver& r) { return load_environment(r, "eight", ""); }

const ContextVector kEight = make_context(Schema::eight_plane, {0.0, 0.12, 0.105, 0.03, 0.03});

std::string code_of(const std::vector<json>& replies) {
  REQUIRE(replies.size() == 1);
  REQUIRE(replies[0]["type"] == "error");
  return replies[0]["code"].get<std::string>();
}

}  // namespace

TEST_SUITE("teleop") {

TEST_CASE("init reports the protocol version and the task environment") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  Session s(eight_env(r), nullptr, r);
  const auto replies = s.handle(json{{"type", "init"}});
  REQUIRE(replies.size() == 1);
  const json& env = replies[0];
  CHECK(env["type"] == "env");
  CHECK(env["version"] == kProtocolVersion);
  CHECK(env["schema"] == "eight_plane");
  CHECK(env["context_dim"] == 6);
  CHECK(env["descriptor"]["kind"] == "plane");
  CHECK(env["descriptor"]["normal"] == json::array({0.0, 1.0, 0.0}));
  CHECK(env["descriptor"]["point"][1] == 0.12);
  CHECK_FALSE(env.contains("context"));

  const auto sphere = s.handle(json{{"type", "init"}, {"task", "double_sphere"}});
  CHECK(sphere[0]["descriptor"]["kind"] == "spheres");
  CHECK_FALSE(sphere[0]["descriptor"].contains("spheres"));
  const auto with_ctx = s.handle(json{{"type", "context"}, {"values", {0.0, 0.1, 0.14, 0.02, 0.01}}});
  const json& spheres = with_ctx[0]["descriptor"]["spheres"];
  REQUIRE(spheres.size() == 2);
  CHECK(spheres[0]["radius"] == 0.02);
  CHECK(spheres[1]["radius"] == 0.01);
  CHECK(with_ctx[0]["context"].size() == 6);
}

TEST_CASE("anatomy task serves the placed mesh") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  Session s(load_environment(r, "anatomy", ""), nullptr, r);
  const json env = s.env_message();
  CHECK(env["descriptor"]["kind"] == "mesh");
  const Mesh& mesh = *s.environment().mesh;
  CHECK(env["descriptor"]["vertices"].size() == mesh.vertices.size());
  CHECK(env["descriptor"]["triangles"].size() == mesh.triangles.size());
  // nominal placement: centroid at the nominal p_ref
  Mesh placed;
  for (const auto& v : env["descriptor"]["vertices"]) placed.vertices.push_back(testing::json_point(v));
  placed.triangles = mesh.triangles;
  CHECK((placed.centroid() - s.environment().task.anatomy.nominal_p_ref).norm() <= 1e-12);
}

TEST_CASE("target equal to the current tip changes nothing") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  Session s(eight_env(r), nullptr, r);
  const Config before = s.config();
  const auto replies = s.handle(testing::target_msg(s.tip()));
  REQUIRE(replies.size() == 1);
  CHECK(replies[0]["type"] == "state");
  CHECK(replies[0]["residual"] == 0.0);
  CHECK(s.config() == before);
  CHECK(replies[0]["backbone"].size() <= 64);
  CHECK(testing::json_point(replies[0]["backbone"].back()) == s.tip());
  CHECK(replies[0]["recording"] == false);
}

TEST_CASE("streamed targets along a reachable line are tracked") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  Session s(eight_env(r), nullptr, r);
  const Vec3 a(-0.02, 0.12, 0.1), b(0.02, 0.12, 0.11);
  testing::settle(s, a);
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const auto reply = s.handle(testing::target_msg(a + (b - a) * (i / 200.0)));
    if (i >= 10) worst = std::max(worst, reply[0]["residual"].get<double>());
    CHECK_NOTHROW(validate(s.environment().robot, s.config()));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("recorded samples are the achieved tips, never the targets") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  Session s(eight_env(r), nullptr, r);
  s.handle(json{{"type", "record"}, {"action", "start"}});
  CHECK(s.state() == SessionState::recording);
  std::vector<Vec3> shown;
  for (const Vec3& p : {Vec3(0.0, 0.12, 0.15), Vec3(0.01, 0.12, 0.12), Vec3(0.3, 0.3, 0.3)}) {
    const auto reply = s.handle(testing::target_msg(p));
    shown.push_back(testing::json_point(reply[0]["tip"]));
    CHECK(reply[0]["recording"] == true);
  }
  REQUIRE(s.buffer().size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s.buffer()[i].tip == shown[i]);
  }
  CHECK(s.buffer()[2].tip == s.tip());
  CHECK(s.buffer()[2].tip != Vec3(0.3, 0.3, 0.3));
  CHECK(s.buffer()[1].time >= s.buffer()[0].time);
}

TEST_CASE("start, stop, save appends one teleop record") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  testing::TempDir dir("teleop");
  DemoStoreWriter store(dir / "demos.jsonl");
  Session s(eight_env(r), &store, r, {}, "session-3");
  const json saved = testing::trace_and_save(s, testing::dense_eight(kEight, 120), kEight);
  CHECK(saved["type"] == "saved");
  CHECK(saved["index"] == 0);
  CHECK(s.buffer().empty());
  CHECK(s.state() == SessionState::idle);
  const auto demos = load_store(dir / "demos.jsonl");
  REQUIRE(demos.size() == 1);
  CHECK(demos[0].meta.source == DemoSource::teleop);
  CHECK(demos[0].meta.session == "session-3");
  CHECK(demos[0].trajectory.size() == 50);
  CHECK(demos[0].context.values == kEight.values);

  const json again = testing::trace_and_save(s, testing::dense_eight(kEight, 60), kEight);
  CHECK(again["index"] == 1);
  CHECK(store.size() == 2);
  DemoStoreWriter reopened(dir / "demos.jsonl");
  CHECK(reopened.size() == 2);
}

TEST_CASE("recording is lossless up to resampling") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  testing::TempDir dir("lossless");
  DemoStoreWriter store(dir / "demos.jsonl");
  Session s(eight_env(r), &store, r);
  const auto curve = testing::dense_eight(kEight, 150);
  s.handle(json{{"type", "context"}, {"values", {0.0, 0.12, 0.105, 0.03, 0.03}}});
  testing::settle(s, curve.front());
  s.handle(json{{"type", "record"}, {"action", "start"}});
  std::vector<Vec3> shown;
  for (const auto& p : curve) shown.push_back(testing::json_point(s.handle(testing::target_msg(p))[0]["tip"]));
  s.handle(json{{"type", "record"}, {"action", "stop"}});
  std::vector<Vec3> raw;
  for (const auto& sample : s.buffer()) raw.push_back(sample.tip);
  CHECK(raw == shown);
  double spacing = 0.0;
  for (std::size_t i = 0; i + 1 < raw.size(); ++i) spacing = std::max(spacing, (raw[i + 1] - raw[i]).norm());
  s.handle(json{{"type", "record"}, {"action", "save"}});
  const auto demos = load_store(dir / "demos.jsonl");
  CHECK(frechet_distance(demos[0].trajectory, raw) < spacing);
}

TEST_CASE("save errors: empty recording, missing context, still recording, no store") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  testing::TempDir dir("errors");
  DemoStoreWriter store(dir / "demos.jsonl");
  Session s(eight_env(r), &store, r);
  CHECK(code_of(s.handle(json{{"type", "record"}, {"action", "save"}})) == "EmptyRecording");
  s.handle(json{{"type", "record"}, {"action", "start"}});
  CHECK(code_of(s.handle(json{{"type", "record"}, {"action", "start"}})) == "ProtocolError");
  s.handle(json{{"type", "record"}, {"action", "stop"}});
  CHECK(code_of(s.handle(json{{"type", "record"}, {"action", "save"}})) == "EmptyRecording");

  s.handle(json{{"type", "record"}, {"action", "start"}});
  s.handle(testing::target_msg(Vec3(0.0, 0.12, 0.14)));
  s.handle(testing::target_msg(Vec3(0.01, 0.12, 0.12)));
  CHECK(code_of(s.handle(json{{"type", "record"}, {"action", "save"}})) == "ProtocolError");
  s.handle(json{{"type", "record"}, {"action", "stop"}});
  CHECK(code_of(s.handle(json{{"type", "record"}, {"action", "save"}})) == "IncompleteContext");
  CHECK(code_of(s.handle(json{{"type", "context"}, {"values", {0.0, 0.12}}})) == "IncompleteContext");
  CHECK_FALSE(s.context().has_value());
  s.handle(json{{"type", "context"}, {"values", {0.0, 0.12, 0.1, 0.02, 0.02, 1.0}}});
  CHECK(s.handle(json{{"type", "record"}, {"action", "save"}})[0]["type"] == "saved");
  CHECK(code_of(s.handle(json{{"type", "record"}, {"action", "stop"}})) == "ProtocolError");

  Session no_store(eight_env(r), nullptr, r);
  no_store.handle(json{{"type", "context"}, {"values", {0.0, 0.12, 0.1, 0.02, 0.02}}});
  no_store.handle(json{{"type", "record"}, {"action", "start"}});
  no_store.handle(testing::target_msg(Vec3(0.0, 0.12, 0.14)));
  no_store.handle(json{{"type", "record"}, {"action", "stop"}});
  CHECK(code_of(no_store.handle(json{{"type", "record"}, {"action", "save"}})) == "IoError");
}

TEST_CASE("malformed messages produce one error and leave the session alone") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  Session s(eight_env(r), nullptr, r);
  s.handle(testing::target_msg(Vec3(0.01, 0.12, 0.12)));
  const Config before = s.config();
  const std::vector<std::string> bad{
      "not json",
      "[]",
      R"({"kind": "target"})",
      R"({"type": 5})",
      R"({"type": "teleport"})",
      R"({"type": "target"})",
      R"({"type": "target", "p": [1, 2]})",
      R"({"type": "target", "p": ["a", 0, 0]})",
      R"({"type": "target", "p": [1e400, 0, 0]})",
      R"({"type": "context", "values": "x"})",
      R"({"type": "record", "action": "pause"})",
      R"({"type": "record", "action": 3})",
      R"({"type": "playback"})",
      R"({"type": "playback", "model": "missing", "context": [0, 0.12, 0.1, 0.02, 0.02]})",
      R"({"type": "init", "task": "no-such-task"})",
      R"({"type": "init", "robot": 7})",
  };
  for (const auto& text : bad) {
    const auto replies = s.handle_text(text);
    REQUIRE(replies.size() == 1);
    CHECK(replies[0]["type"] == "error");
    CHECK(replies[0].contains("msg"));
    CHECK(s.config() == before);
    CHECK(s.environment().task.variant == Schema::eight_plane);
  }
}

TEST_CASE("playback: schema check, overlay and one state per waypoint") {
  testing::ModelTable table;
  TrainingSet data;
  data.schema = Schema::eight_plane;
  Rng rng(2);
  const TaskDef task = testing::task("eight");
  for (int i = 0; i < 10; ++i) {
    const ContextVector c = sample_context(task, rng);
    data.contexts.push_back(c);
    data.trajectories.push_back(oracle_eight(c, 30));
  }
  HyperParams h;
  h.alpha = 1e-9;
  table.models["eight-linear"] = train(ModelFamily::linear, data, h);
  TrainingSet other;
  other.schema = Schema::anatomy;
  other.contexts = {make_context(Schema::anatomy, {0, 0, 0.1, 1}), make_context(Schema::anatomy, {0, 0, 0.12, 1.2})};
  other.trajectories = {TipTrajectory(5, Vec3::Zero()), TipTrajectory(5, Vec3::Ones())};
  table.models["anatomy-linear"] = train(ModelFamily::linear, other, h);

  const ResourceResolver r = table.resolver();
  Session s(eight_env(r), nullptr, r);
  const json ctx = {0.0, 0.12, 0.105, 0.03, 0.03};
  CHECK(code_of(s.handle(json{{"type", "playback"}, {"model", "anatomy-linear"}, {"context", ctx}})) ==
        "SchemaMismatch");
  const auto stream = s.handle(json{{"type", "playback"}, {"model", "eight-linear"}, {"context", ctx}});
  REQUIRE(stream.size() == 31);
  CHECK(stream[0]["type"] == "env");
  REQUIRE(stream[0]["predicted"].size() == 30);
  const TipTrajectory expected = oracle_eight(kEight, 30);
  double worst = 0.0;
  for (std::size_t i = 1; i < stream.size(); ++i) {
    CHECK(stream[i]["type"] == "state");
    CHECK(stream[i]["state"] == "playback");
    CHECK(stream[i]["index"] == i - 1);
    worst = std::max(worst, (testing::json_point(stream[i]["tip"]) - expected[i - 1]).norm());
  }
  CHECK(worst < 1e-3);
  CHECK(s.state() == SessionState::idle);
  CHECK(s.env_message().contains("predicted"));

  s.handle(json{{"type", "record"}, {"action", "start"}});
  CHECK(code_of(s.handle(json{{"type", "playback"}, {"model", "eight-linear"}, {"context", ctx}})) ==
        "ProtocolError");
}

TEST_CASE("reset returns home and clears the recording") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  Session s(eight_env(r), nullptr, r);
  s.handle(json{{"type", "record"}, {"action", "start"}});
  s.handle(testing::target_msg(Vec3(0.01, 0.12, 0.12)));
  const auto reply = s.handle(json{{"type", "reset"}});
  CHECK(reply[0]["type"] == "state");
  CHECK(s.config() == home_config(s.environment().robot));
  CHECK(s.buffer().empty());
  CHECK(s.state() == SessionState::idle);
}

TEST_CASE("decimation keeps both ends and the limit") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 101; ++i) pts.emplace_back(i, 0, 0);
  const auto d = decimate(pts, 64);
  CHECK(d.size() == 64);
  CHECK(d.front() == pts.front());
  CHECK(d.back() == pts.back());
  CHECK(decimate(pts, 200).size() == 101);
  for (std::size_t i = 0; i + 1 < d.size(); ++i) CHECK(d[i + 1].x() > d[i].x());
}

TEST_CASE("a saved teleop record trains a model that reproduces it") {
  testing::ModelTable table;
  const ResourceResolver r = table.resolver();
  testing::TempDir dir("roundtrip");
  DemoStoreWriter store(dir / "demos.jsonl");
  Session s(eight_env(r), &store, r);
  testing::trace_and_save(s, testing::dense_eight(kEight), kEight);
  const auto demos = load_store(dir / "demos.jsonl");
  const TrainingSet data = to_training_set(demos);
  HyperParams h;
  h.alpha = 1e-12;
  const ContextModel m = train(ModelFamily::rbf, data, h);
  const TipTrajectory p = predict(m, demos[0].context);
  CHECK(frechet_distance(p, demos[0].trajectory) < 1e-9);
}

TEST_CASE("fuzz: 10k random well-formed messages keep the config valid") {
  testing::ModelTable table;
  TrainingSet other;
  other.schema = Schema::anatomy;
  other.contexts = {make_context(Schema::anatomy, {0, 0, 0.1, 1}), make_context(Schema::anatomy, {0, 0, 0.12, 1.2})};
  other.trajectories = {TipTrajectory(5, Vec3::Zero()), TipTrajectory(5, Vec3::Ones())};
  table.models["wrong-schema"] = train(ModelFamily::linear, other, HyperParams{});
  const ResourceResolver r = table.resolver();
  testing::TempDir dir("fuzz");
  DemoStoreWriter store(dir / "demos.jsonl");
  TeleopOptions opt;
  opt.max_ik_steps = 2;
  Session s(eight_env(r), &store, r, opt);

  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> coord(-0.3, 0.3);
  std::uniform_real_distribution<double> near(-0.02, 0.02);
  std::uniform_int_distribution<int> kind(0, 99);
  const char* actions[] = {"start", "stop", "save"};
  int errors = 0, saved = 0;
  for (int i = 0; i < 10000; ++i) {
    const int k = kind(rng);
    json msg;
    if (k < 55) {
      const Vec3 p = k < 40 ? Vec3(near(rng), 0.12 + near(rng), 0.11 + near(rng)) : Vec3(coord(rng), coord(rng), coord(rng));
      msg = testing::target_msg(p);
    } else if (k < 75) {
      msg = {{"type", "record"}, {"action", actions[rng() % 3]}};
    } else if (k < 85) {
      std::vector<double> values;
      const std::size_t n = 3 + rng() % 4;
      for (std::size_t j = 0; j < n; ++j) values.push_back(near(rng));
      msg = {{"type", "context"}, {"values", values}};
    } else if (k < 90) {
      msg = {{"type", "playback"}, {"model", rng() % 2 ? "wrong-schema" : "absent"}, {"context", {0, 0.12, 0.1, 0.02, 0.02}}};
    } else if (k < 95) {
      msg = {{"type", "reset"}};
    } else if (k < 97) {
      msg = {{"type", "init"}};
    } else {
      msg = {{"type", "target"}, {"p", {coord(rng), coord(rng)}}};
    }
    const auto replies = s.handle(msg);
    REQUIRE_FALSE(replies.empty());
    for (const auto& reply : replies) {
      if (reply["type"] == "error") ++errors;
      if (reply["type"] == "saved") ++saved;
    }
    REQUIRE_NOTHROW(validate(s.environment().robot, s.config()));
    REQUIRE((s.state() == SessionState::recording || s.buffer().empty() || s.state() == SessionState::idle));
  }
  MESSAGE(errors << " error replies, " << saved << " saves");
  CHECK(saved > 0);
  CHECK(load_store(dir / "demos.jsonl").size() == static_cast<std::size_t>(saved));
}

}  // TEST_SUITE
