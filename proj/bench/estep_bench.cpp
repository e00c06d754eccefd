// Times the serial reference E-step against the OpenMP one on a synthetic
// dataset and checks that both select the same candidates.
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include <omp.h>

#include "actseg/synth.hpp"
#include "actseg/trainer.hpp"

using namespace actseg;

namespace {

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    best = std::min(best, dt.count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t videos = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 40;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 3;

  SynthSpec spec;
  spec.videos_per_task = videos;
  const auto data = synth_generate(spec);
  ModelConfig mc;
  mc.feature_dim = spec.feature_dim;
  Rng rng(1);
  const ModelParams params = init_model(mc, rng);
  TrainConfig cfg;
  TrainState state;

  std::vector<VideoSelection> serial, parallel;
  const double ts = best_of(reps, [&] { serial = e_step_serial(params, data.videos, cfg, state); });
  const double tp = best_of(reps, [&] {
    parallel = e_step(params, data.videos, cfg, state, Execution::kParallel);
  });

  bool same = serial.size() == parallel.size();
  for (std::size_t i = 0; same && i < serial.size(); ++i) {
    same = serial[i].selected == parallel[i].selected &&
           serial[i].chosen().labels.labels == parallel[i].chosen().labels.labels &&
           serial[i].chosen().total == parallel[i].chosen().total;
  }
  std::printf("videos %zu  K %zu  threads %d\n", videos, cfg.ranking.num_candidates,
              omp_get_max_threads());
  std::printf("serial   %.4f s\nparallel %.4f s\nspeedup  %.2fx\nidentical %s\n", ts, tp, ts / tp,
              same ? "yes" : "NO");
  return same ? 0 : 1;
}
