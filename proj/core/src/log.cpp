// Copyright 2026 The Multi-AMP Authors
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

#include "multiamp/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace mamp::log {

namespace {
std::atomic<Level> g_level{Level::kInfo};
std::mutex g_mutex;

void Emit(Level level, std::string_view tag, std::string_view message) {
  if (level < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << '[' << tag << "] " << message << '\n';
}
}  // namespace

void SetLevel(Level level) { g_level.store(level); }
Level GetLevel() { return g_level.load(); }

void Debug(std::string_view message) { Emit(Level::kDebug, "debug", message); }
void Info(std::string_view message) { Emit(Level::kInfo, "info", message); }
void Warning(std::string_view message) {
  Emit(Level::kWarning, "warning", message);
}
void Error(std::string_view message) { Emit(Level::kError, "error", message); }

}  // namespace mamp::log
