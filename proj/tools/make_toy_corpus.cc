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

// Writes the toy corpus: sequences of the toy data LM as whitespace text.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "resebm/config.h"
#include "resebm/random.h"
#include "resebm/toy_task.h"

int main(int argc, char** argv) {
  CLI::App app{"Write a corpus sampled from the toy data LM"};
  std::string config_path;
  std::string out_path;
  std::size_t count = 2000;
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "toy configuration file")->required();
  app.add_option("--out", out_path, "output corpus")->required();
  app.add_option("--count", count, "number of lines (default: 2000)");
  app.add_option("--seed", seed, "sampling seed (default: 1)");
  CLI11_PARSE(app, argc, argv);
  try {
    const resebm::ToyTask task =
        resebm::BuildToyTask(resebm::ToyConfig::FromConfig(resebm::Config::Load(config_path)));
    std::ofstream f(out_path, std::ios::binary);
    for (const std::string& line : resebm::ToyCorpusLines(task, count, seed)) {
      f << line << '\n';
    }
    if (!f) throw std::runtime_error("cannot write " + out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
