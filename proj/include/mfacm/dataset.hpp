// Copyright 2026 The mfacm Authors
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

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "mfacm/datastore.hpp"
#include "mfacm/trainer.hpp"

namespace mfacm::dataset {

/// Loader threads: MFA_POOL_THREADS when set to a positive integer,
/// otherwise the hardware concurrency.
inline std::size_t pool_threads() {
  if (const char* env = std::getenv("MFA_POOL_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Loads every manifest entry's LEB file (paths relative to `data_dir`).
/// Output order follows the manifest regardless of the thread count.
inline std::vector<train::Example<float>> load(const std::vector<io::ManifestEntry>& manifest,
                                               const std::filesystem::path& data_dir,
                                               std::size_t threads = pool_threads()) {
  std::vector<train::Example<float>> out(manifest.size());
  std::vector<std::exception_ptr> errors(manifest.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < manifest.size();) {
      try {
        const auto& e = manifest[i];
        out[i] = {e.utt_id, io::read_leb(data_dir / e.path), e.label};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, manifest.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw IoError(manifest[i].path + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<io::ManifestEntry> read_manifest(const std::filesystem::path& path) {
  return io::parse_manifest(io::read_file(path));
}

}  // namespace mfacm::dataset
