// Serial reference loops against their OpenMP versions.

#include <benchmark/benchmark.h>

#include "tdlfd/ik.hpp"
#include "tdlfd/learning.hpp"
#include "tdlfd/manifest.hpp"
#include "tdlfd/metrics.hpp"
#include "tdlfd/tasks.hpp"

using namespace tdlfd;

namespace {

const std::filesystem::path kData = TDLFD_DATA_DIR;

Exec mode(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "parallel" : "serial"); }

void BM_GenerateDataset(benchmark::State& state) {
  const TaskDef task = load_task(kData / "tasks/eight.json");
  const RobotSpec robot = load_robot(resolve_resource(task.robot, "robots"));
  DatasetOptions o;
  o.count = 4;
  o.exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(task, robot, o, IkSettings{}));
  label(state);
}
BENCHMARK(BM_GenerateDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RbfGram(benchmark::State& state) {
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Random(400, 6);
  for (auto _ : state) benchmark::DoNotOptimize(rbf_gram(pts, 10.0, mode(state)));
  label(state);
}
BENCHMARK(BM_RbfGram)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EvaluateModel(benchmark::State& state) {
  const TaskDef task = load_task(kData / "tasks/eight.json");
  const RobotSpec robot = load_robot(resolve_resource(task.robot, "robots"));
  DatasetOptions o;
  o.count = 10;
  const auto demos = generate_dataset(task, robot, o, IkSettings{});
  const TrainingSet data = to_training_set(demos);
  const ContextModel model = train(ModelFamily::rbf, data, HyperParams{});
  std::vector<EvaluationCase> cases;
  for (const auto& d : demos) cases.push_back({d.context, d.trajectory});
  cases.resize(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_model(model, cases, EvalMode::vs_demo, robot, IkSettings{}, "bench", mode(state)));
  }
  label(state);
}
BENCHMARK(BM_EvaluateModel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TipJacobian(benchmark::State& state) {
  const RobotSpec robot = load_robot(kData / "robots/robot_eight.json");
  Config c = home_config(robot);
  c.tensions.setConstant(2.0);
  IkSettings s;
  s.exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(tip_jacobian(robot, c, s));
  label(state);
}
BENCHMARK(BM_TipJacobian)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
