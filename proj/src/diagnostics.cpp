/*
 Copyright 2026 The oopdmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "oopdmp/diagnostics.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace oopdmp {

namespace {

std::mutex g_mutex;
WarningHandler g_handler;
std::atomic<long> g_count{0};

}  // namespace

void warn(const std::string& message) {
    ++g_count;
    std::lock_guard<std::mutex> lock(g_mutex);
    if (g_handler) {
        g_handler(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard<std::mutex> lock(g_mutex);
    WarningHandler previous = std::move(g_handler);
    g_handler = std::move(handler);
    return previous;
}

long warning_count() noexcept { return g_count.load(); }

}  // namespace oopdmp
