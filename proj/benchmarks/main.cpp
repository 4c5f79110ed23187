#include <benchmark/benchmark.h>

// The distro's benchmark_main archive carries LTO bytecode that other gcc
// releases cannot link, so the entry point lives here.
BENCHMARK_MAIN();
