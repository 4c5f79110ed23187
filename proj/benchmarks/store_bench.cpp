#include <benchmark/benchmark.h>

#include "fewie/store.hpp"
#include "synthetic.hpp"

namespace {

void BM_StoreLookup(benchmark::State& state) {
  const auto corpus = fewie::testing::make_balanced_corpus({.n_classes = 5, .sentences_per_class = 200});
  fewie::testing::TempDir dir("fewie-bench");
  fewie::store_write(dir / "s.fewe", fewie::testing::make_clustered_embeddings(corpus, 768, 0.5, 1), 768);
  const auto store = fewie::store_read(dir / "s.fewe");
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.lookup(corpus.sentences()[i++ % corpus.size()].id));
  }
}
BENCHMARK(BM_StoreLookup);

}  // namespace
