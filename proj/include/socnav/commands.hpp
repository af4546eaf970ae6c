// Copyright 2026 The socnav Authors
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
//
// Command-line pipeline: gen-data, train-predictor, train-policy, collect,
// eval, continual. Every command is reproducible from (flags, config file,
// seed); all artifacts are byte-identical across reruns.
//
// Exit codes: 0 success, 2 I/O failure, 3 bad flags, 4 missing prerequisite.

#ifndef SOCNAV_COMMANDS_HPP_
#define SOCNAV_COMMANDS_HPP_

#include <map>
#include <string>
#include <vector>

namespace socnav {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 2;
inline constexpr int kExitFlags = 3;
inline constexpr int kExitMissing = 4;

// Flat `key = value` config file with `#` comments. Keys mirror the long
// flag names with underscores (seed, dt, epochs, batch, lr, w_cp, ...).
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Full CLI entry point; args exclude the program name.
int run_command(const std::vector<std::string>& args);

}  // namespace socnav

#endif  // SOCNAV_COMMANDS_HPP_
