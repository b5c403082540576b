// Copyright 2026 The resebm Authors.
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

#ifndef RESEBM_CLI_H_
#define RESEBM_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace resebm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;

// Runs one subcommand; args excludes the program name. Reports go to files
// named by *_out keys, or to `out` when unset. Diagnostics go to `err`.
int Dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

// Every configuration key understood by at least one subcommand.
std::vector<std::string> KnownKeys();

}  // namespace resebm::cli

#endif  // RESEBM_CLI_H_
