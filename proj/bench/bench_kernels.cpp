// Copyright 2026 The CLoRA Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parallel vs serial GEMM timings. Usage: bench_kernels [max_size] [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "clora/kernels.hpp"
#include "clora/linalg.hpp"

namespace {

using Gemm = void (*)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t, std::size_t,
                      std::size_t);

double seconds_per_call(Gemm f, const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& c,
                        std::size_t n, int reps) {
  f(a, b, c, n, n, n);  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f(a, b, c, n, n, n);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t max_n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 256;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 5;

  struct Kernel {
    const char* name;
    Gemm parallel;
    Gemm serial;
  };
  const Kernel kernels[] = {
      {"nn", clora::kernels::gemm_nn, clora::kernels::serial::gemm_nn},
      {"tn", clora::kernels::gemm_tn, clora::kernels::serial::gemm_tn},
      {"nt", clora::kernels::gemm_nt, clora::kernels::serial::gemm_nt},
  };

  std::printf("threads %d\n", clora::kernels::max_threads());
  std::printf("%-4s %6s %12s %12s %8s %s\n", "op", "n", "serial ms", "parallel ms", "speedup", "bitwise");
  clora::Rng rng(7);
  for (std::size_t n = 32; n <= max_n; n *= 2) {
    std::vector<double> a(n * n), b(n * n), c1(n * n), c2(n * n);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
    for (const auto& k : kernels) {
      const double ts = seconds_per_call(k.serial, a, b, c1, n, reps);
      const double tp = seconds_per_call(k.parallel, a, b, c2, n, reps);
      std::printf("%-4s %6zu %12.3f %12.3f %8.2f %s\n", k.name, n, ts * 1e3, tp * 1e3, ts / tp,
                  c1 == c2 ? "equal" : "DIFFER");
    }
  }
  return 0;
}
