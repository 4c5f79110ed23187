#include <benchmark/benchmark.h>

#include "fewie/sampler.hpp"
#include "synthetic.hpp"

namespace {

void BM_SampleEpisode(benchmark::State& state) {
  const auto corpus = fewie::testing::make_random_corpus(3, 2000);
  const fewie::EpisodeSampler sampler(corpus);
  const fewie::EpisodeSpec spec{3, static_cast<std::size_t>(state.range(0)), 1, 0, false};
  std::uint64_t i = 0;
  for (auto _ : state) {
    auto rng = fewie::CounterRng::child(7, i++);
    benchmark::DoNotOptimize(sampler.sample(spec, rng));
  }
}
BENCHMARK(BM_SampleEpisode)->Arg(1)->Arg(5);

}  // namespace
