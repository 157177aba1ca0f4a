// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace smle::detail {

// Runs work(i, slot) for i in [0, n) on up to `threads` workers, in waves of
// `threads` items, then calls fold(i, slot) in increasing i. Results depend
// only on the fold order, never on the worker count.
template <typename Work, typename Fold>
void ordered_parallel(int n, int threads, Work&& work, Fold&& fold) {
  threads = std::max(1, threads);
  for (int base = 0; base < n; base += threads) {
    const int count = std::min(threads, n - base);
    if (count == 1) {
      work(base, 0);
    } else {
      std::vector<std::exception_ptr> errors(count);
      {
        std::vector<std::jthread> pool;
        for (int w = 1; w < count; ++w)
          pool.emplace_back([&, w] {
            try {
              work(base + w, w);
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        try {
          work(base, 0);
        } catch (...) {
          errors[0] = std::current_exception();
        }
      }
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (int w = 0; w < count; ++w) fold(base + w, w);
  }
}

}  // namespace smle::detail
