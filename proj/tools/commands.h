/*
 * Copyright 2026 The NFS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Subcommand driver for the `nfs` tool.

#ifndef NFS_TOOLS_COMMANDS_H_
#define NFS_TOOLS_COMMANDS_H_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace nfs::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

// Runs one invocation; `args` excludes the program name. Diagnostics go to
// `err`, one line per failure.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// floor(percent / 100 * d); throws InvalidArgument when that is 0 or > d.
std::size_t KeepCount(double percent, std::size_t feature_count);

// Attention heads for a model trained on `subset` of `feature_count`
// features: the fixed values 1 (5%, 10%), 4 (30%) and 3 (40%) when the
// subset size is exactly that fraction and the head count divides the
// width, otherwise the largest divisor of `width` not above `requested`.
std::size_t HeadsForSubset(std::size_t width, std::size_t requested, std::size_t subset,
                           std::size_t feature_count);

}  // namespace nfs::cli

#endif  // NFS_TOOLS_COMMANDS_H_
