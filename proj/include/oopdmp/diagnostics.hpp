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

#pragma once

#include <functional>
#include <string>

namespace oopdmp {

using WarningHandler = std::function<void(const std::string&)>;

/// Route a warning to the installed handler (stderr by default).
void warn(const std::string& message);

/// Install a handler and return the previous one. Passing an empty function
/// restores the stderr default.
WarningHandler set_warning_handler(WarningHandler handler);

/// Number of warnings emitted since process start.
long warning_count() noexcept;

}  // namespace oopdmp
