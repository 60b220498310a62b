// Copyright 2026 The txforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// txforge command line: serve, run, replay, report.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "txforge/config.hpp"
#include "txforge/session.hpp"

namespace {

using namespace txforge;
using json = nlohmann::json;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

constexpr int kExitError = 1;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out;
};

config::SessionConfig load_config(const std::string& path, const Overrides& o) {
  config::SessionConfig c = config::load(path);
  if (const char* env = std::getenv("TXFORGE_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw config::ConfigError(std::string("TXFORGE_SEED is not an unsigned integer: ") + env);
    }
  }
  if (o.seed) c.seed = *o.seed;
  if (o.mode) {
    json j = config::to_json(c);
    j["mode"] = *o.mode;
    c = config::from_json(j);
  }
  if (o.out) c.output_dir = *o.out;
  config::validate(c);
  return c;
}

void progress(const std::string& msg) { std::cerr << "txforge: " << msg << "\n"; }

int finish(const session::SessionResult& r, const std::optional<std::filesystem::path>& out) {
  if (out) session::write_outputs(r, *out);
  std::cout << session::render_summary(r.report);
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"txforge: controllable blockchain simulator and DApp synchronization checker"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;
  std::string log_path;
  std::string in_dir;

  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "session config (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", ov.seed, "overrides TXFORGE_SEED and the config seed");
    sub->add_option("--mode", ov.mode, "traverse or soak")->check(CLI::IsMember({"traverse", "soak"}));
  };

  auto* serve = app.add_subcommand("serve", "run the node and harness until interrupted");
  add_overrides(serve);
  serve->add_option("--out", ov.out, "output directory (defaults to the config's)");

  auto* run = app.add_subcommand("run", "run a batch session and write reports");
  add_overrides(run);
  run->add_option("--out", ov.out, "output directory")->required();

  auto* replay = app.add_subcommand("replay", "re-execute a session log and re-analyze it");
  replay->add_option("--log", log_path, "session log (JSONL)")->required()->check(CLI::ExistingFile);
  std::optional<std::string> replay_out;
  replay->add_option("--out", replay_out, "also write report.json and summary.txt here");

  auto* report = app.add_subcommand("report", "re-render the summary of a finished session");
  report->add_option("--in", in_dir, "session output directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*run || *serve) {
      const auto c = load_config(config_path, ov);
      const std::filesystem::path out = c.output_dir;
      session::RunOptions opt;
      opt.log_path = out / "session.log.jsonl";
      opt.stop = [] { return g_interrupted.load(); };
      opt.progress = progress;
      opt.serve = serve->parsed();
      if (opt.serve) progress("serving; interrupt to finish and write reports");
      auto r = session::run_session(c, opt);
      return finish(r, out);
    }
    if (*replay) {
      session::RunOptions opt;
      opt.stop = [] { return g_interrupted.load(); };
      auto r = session::replay(log_path, opt);
      return finish(r, replay_out ? std::optional<std::filesystem::path>(*replay_out) : std::nullopt);
    }
    if (*report) {
      const auto path = std::filesystem::path(in_dir) / "report.json";
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot read " + path.string());
      json j = json::parse(in);
      const std::string text = session::render_summary(j);
      std::ofstream(std::filesystem::path(in_dir) / "summary.txt", std::ios::trunc) << text;
      std::cout << text;
      const auto& counts = j.at("counts");
      return counts.at("assertion1_violations").get<std::size_t>() + counts.at("assertion2_violations").get<std::size_t>() > 0
                 ? 2
                 : 0;
    }
  } catch (const config::ConfigError& e) {
    std::cerr << "txforge: config error: " << e.what() << "\n";
    return kExitError;
  } catch (const session::SessionError& e) {
    std::cerr << "txforge: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "txforge: error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
