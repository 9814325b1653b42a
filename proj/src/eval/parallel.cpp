// Copyright 2026 The antforge Authors.
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

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "antforge/eval.hpp"

namespace antforge {

void parallel_for(int64_t chunks, int threads, const std::function<void(int64_t)>& fn) {
  if (chunks <= 0) return;
  const int64_t workers = std::clamp<int64_t>(threads, 1, chunks);
  if (workers == 1) {
    for (int64_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<int64_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto run = [&] {
    for (int64_t c = next++; c < chunks; c = next++) {
      try {
        fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = chunks;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers - 1));
  for (int64_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<int> predict_all(const ArchSpec& arch, const ParamSet& params, const TensorF& images,
                             EvalOptions opts) {
  const int64_t n = images.dim(0);
  const int64_t chunk = std::max<int64_t>(1, opts.chunk);
  std::vector<int> out(static_cast<size_t>(n));
  parallel_for((n + chunk - 1) / chunk, opts.threads, [&](int64_t c) {
    const int64_t b = c * chunk, e = std::min(n, b + chunk);
    const auto pred = predict_labels(arch, params, images.slice_rows(b, e));
    std::copy(pred.begin(), pred.end(), out.begin() + b);
  });
  return out;
}

double accuracy(const ArchSpec& arch, const ParamSet& params, const Dataset& data, EvalOptions opts) {
  if (data.size() == 0) throw InputError("accuracy of an empty dataset");
  const auto pred = predict_all(arch, params, data.images, opts);
  int64_t correct = 0;
  for (int64_t i = 0; i < data.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace antforge
