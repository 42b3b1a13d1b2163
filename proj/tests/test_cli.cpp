// Copyright 2026 The cipherlm Authors.
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

#include <doctest.h>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cipherlm/model_io.hpp"
#include "test_util.hpp"

extern char** environ;

using namespace cipherlm;
using cipherlm::testing::TempDir;

namespace {

namespace fs = std::filesystem;

struct Run {
  int status = -1;
  std::string out, err;
};

pid_t spawn(const std::vector<std::string>& args, const fs::path& out,
            const fs::path& err, const fs::path& in = {}) {
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(CIPHERLM_CLI));
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  if (!in.empty()) posix_spawn_file_actions_addopen(&fa, 0, in.c_str(), O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&fa, 1, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&fa, 2, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, CIPHERLM_CLI, &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  REQUIRE(rc == 0);
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

Run run(const TempDir& dir, const std::vector<std::string>& args,
        const fs::path& in = {}) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  Run r;
  r.status = wait_exit(spawn(args, out, err, in));
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

/// Every regular file under dir, concatenated.
std::string all_files(const fs::path& dir) {
  std::string all;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) all += read_file(e.path());
  }
  return all;
}

const char* kSecret = "correct-horse-battery-staple-7";

}  // namespace

TEST_CASE("help, version and usage errors") {
  TempDir dir("cli");
  const Run help = run(dir, {"adapt", "--help"});
  CHECK(help.status == 0);
  CHECK(help.out.find("--passkey-env") != std::string::npos);

  const Run version = run(dir, {"--version"});
  CHECK(version.status == 0);
  CHECK(version.out.find("cipherlm 0.1.0") != std::string::npos);
  CHECK(version.out.find("format_version 1") != std::string::npos);

  CHECK(run(dir, {}).status == 1);
  CHECK(run(dir, {"adapt", "--bogus"}).status == 1);
  CHECK(run(dir, {"adapt", "--vocab", "x"}).status == 1);

  unsetenv("CIPHERLM_TEST_UNSET_KEY");
  const Run missing = run(dir, {"encrypt", "--vocab", testing::data_path("toy_vocab.txt"),
                                "--passkey-env", "CIPHERLM_TEST_UNSET_KEY", "--text", "good"});
  CHECK(missing.status == 1);
  CHECK(missing.err.find("CIPHERLM_TEST_UNSET_KEY") != std::string::npos);

  const Run no_file = run(dir, {"train", "--plain",
                                (dir / "nope.txt").string() + "," + (dir / "nope.clm1").string(),
                                "--data", testing::data_path("toy_sentiment.tsv"), "--out",
                                dir / "h.json"});
  CHECK(no_file.status == 2);
}

TEST_CASE("end-to-end pipeline through the command line") {
  TempDir dir("cli");
  setenv("CIPHERLM_TEST_PASSKEY", kSecret, 1);
  const std::string vocab = testing::data_path("toy_vocab.txt");
  const std::string emb = testing::data_path("toy_emb.clm1");
  const std::string tsv = testing::data_path("toy_sentiment.tsv");
  std::string transcript;
  auto step = [&](const std::vector<std::string>& args) {
    const Run r = run(dir, args);
    transcript += r.out + r.err;
    return r;
  };

  REQUIRE(step({"adapt", "--vocab", vocab, "--emb", emb, "--passkey-env",
                "CIPHERLM_TEST_PASSKEY", "--out", dir / "bundle"})
              .status == 0);
  for (const char* f : {"vocab.txt", "embeddings.clm1", "manifest.json"}) {
    CHECK(fs::exists(dir / "bundle" / f));
  }

  const Run enc = step({"encrypt", "--vocab", vocab, "--passkey-env",
                        "CIPHERLM_TEST_PASSKEY", "--text", "the movie was good"});
  REQUIRE(enc.status == 0);
  CHECK(enc.out.size() == 4 * 9);

  write_file(dir / "lines.txt", "the movie was good\r\n\nvery dull\n");
  const Run lines = run(dir, {"encrypt", "--vocab", vocab, "--passkey-env",
                              "CIPHERLM_TEST_PASSKEY"},
                        dir / "lines.txt");
  REQUIRE(lines.status == 0);
  CHECK(lines.out.substr(0, enc.out.size()) == enc.out);
  CHECK(std::count(lines.out.begin(), lines.out.end(), '\n') == 3);
  CHECK(lines.out.size() == enc.out.size() + 1 + 2 * 9);
  transcript += lines.out + lines.err;

  const Run te = step({"train", "--bundle", dir / "bundle", "--vocab", vocab,
                       "--passkey-env", "CIPHERLM_TEST_PASSKEY", "--data", tsv, "--out",
                       dir / "head_enc.json"});
  REQUIRE(te.status == 0);
  const Run tp = step({"train", "--plain", vocab + "," + emb, "--data", tsv, "--out",
                       dir / "head_plain.json"});
  REQUIRE(tp.status == 0);
  const auto je = nlohmann::json::parse(te.out), jp = nlohmann::json::parse(tp.out);
  CHECK(je["examples"] == 200);
  CHECK(std::abs(je["final_loss"].get<double>() - jp["final_loss"].get<double>()) < 1e-4);
  CHECK(je["train_accuracy"] == jp["train_accuracy"]);

  // Server in the background on a free port.
  const pid_t server = spawn({"serve", "--bundle", dir / "bundle", "--head",
                              dir / "head_enc.json", "--bind", "127.0.0.1:0"},
                             dir / "serve.out", dir / "serve.err");
  int port = 0;
  for (int i = 0; i < 200 && port == 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    const std::string out = read_file(dir / "serve.out");
    if (out.find('\n') != std::string::npos) {
      port = nlohmann::json::parse(out)["port"].get<int>();
    }
  }
  REQUIRE(port > 0);
  const std::string url = "http://127.0.0.1:" + std::to_string(port);

  const Run inf = step({"infer", "--server", url, "--vocab", vocab, "--passkey-env",
                        "CIPHERLM_TEST_PASSKEY", "--text", "the movie was really good"});
  CHECK(inf.status == 0);
  const auto ji = nlohmann::json::parse(inf.out);
  CHECK(ji["scores"].size() == 2);
  CHECK(ji["model_fingerprint"].get<std::string>().size() == 16);

  const Run empty = step({"infer", "--server", url, "--vocab", vocab, "--passkey-env",
                          "CIPHERLM_TEST_PASSKEY", "--text", ""});
  CHECK(empty.status == 1);

  kill(server, SIGTERM);
  CHECK(wait_exit(server) == 0);
  transcript += read_file(dir / "serve.out") + read_file(dir / "serve.err");

  const Run unreachable = step({"infer", "--server", url, "--vocab", vocab,
                                "--passkey-env", "CIPHERLM_TEST_PASSKEY", "--text", "good"});
  CHECK(unreachable.status == 2);

  const Run an = step({"analyze", "--orig", emb, "--bundle", dir / "bundle",
                       "--passkey-env", "CIPHERLM_TEST_PASSKEY", "--distance-csv",
                       dir / "drift.csv", "--report", dir / "report.json", "--pairs",
                       "2000", "--k", "5"});
  REQUIRE(an.status == 0);
  const auto jr = nlohmann::json::parse(read_file(dir / "report.json"));
  CHECK(jr["k"] == 5);
  CHECK(jr["sample_size"] == 84);
  CHECK(jr["distance_drift_max"].get<double>() < 1e-4);
  CHECK(jr["nn_accuracy"].get<double>() <= 1.0);

  const Run blind = step({"analyze", "--orig", emb, "--bundle", dir / "bundle"});
  CHECK(blind.status == 0);
  CHECK(nlohmann::json::parse(blind.out)["distance_drift_max"].is_null());
  CHECK(step({"analyze", "--orig", emb, "--bundle", dir / "bundle", "--distance-csv",
              dir / "x.csv"})
            .status == 1);

  // The passkey never shows up in any output or file.
  CHECK(transcript.find(kSecret) == std::string::npos);
  CHECK(all_files(dir.path()).find(kSecret) == std::string::npos);
  unsetenv("CIPHERLM_TEST_PASSKEY");
}
