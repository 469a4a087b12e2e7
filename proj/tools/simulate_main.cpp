// Copyright 2026 The Feeding Station Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// simulate --scenario <file> --seed N --report <out>

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "feeder/simharness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Run a scenario through station, link and server"};
  std::string scenario_path;
  std::string report_path;
  std::uint64_t seed = 1;
  bool verbose = false;
  app.add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--report", report_path, "Report output file, - for stdout")->required();
  app.add_flag("-v,--verbose", verbose, "Station log on stderr");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto scenario = feeder::sim::load_scenario(scenario_path);
    feeder::Logger log(&std::cerr, verbose ? feeder::LogLevel::kInfo : feeder::LogLevel::kWarn);
    const auto report = feeder::sim::run_scenario(scenario, seed, &log);
    const std::string text = report.table() + report.lines();
    if (report_path == "-") {
      std::cout << text;
    } else {
      std::ofstream out(report_path);
      out << text;
      if (!out) throw std::runtime_error("cannot write " + report_path);
    }
    std::cerr << report.table();
  } catch (const std::exception& e) {
    std::cerr << "simulate: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
