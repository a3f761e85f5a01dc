#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace docval::detail {

/// Runs work(i) for i in [0, n) on up to `workers` threads and hands the
/// results to emit(i, result) on the calling thread in index order, as soon
/// as each prefix is complete.
template <typename Work, typename Emit>
void ordered_parallel(std::size_t n, std::size_t workers, Work&& work, Emit&& emit) {
  using Result = decltype(work(std::size_t{}));
  std::vector<std::optional<Result>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<bool> done(n, false);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};

  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      std::optional<Result> r;
      std::exception_ptr err;
      try {
        r.emplace(work(i));
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::lock_guard lock(mu);
        results[i] = std::move(r);
        errors[i] = err;
        done[i] = true;
      }
      cv.notify_all();
    }
  };

  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);

  std::exception_ptr first_error;
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<Result> r;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return done[i]; });
      if (errors[i]) {
        if (!first_error) first_error = errors[i];
        continue;
      }
      r = std::move(results[i]);
      results[i].reset();
    }
    if (!first_error) emit(i, std::move(*r));
  }
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace docval::detail
