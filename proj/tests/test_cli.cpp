// Copyright 2026 The blockmetric Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "../tools/cli.hpp"
#include "blockmetric/io.hpp"
#include "blockmetric/synth.hpp"

using namespace blockmetric;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"blockmetric"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Workspace {
 public:
  Workspace() {
    dir_ = fs::temp_directory_path() / ("blockmetric_cli_" + std::to_string(counter_++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // small BlockMix pair set written as x.gsf / y.gsf / gt.txt
  void synth(std::size_t pairs = 120, std::size_t dim = 16) {
    write_text(path("spec.txt"), "pairs=" + std::to_string(pairs) + "\ndim=" +
                                     std::to_string(dim) + "\nblock=4\nseed=3\n");
    const auto r = invoke({"synth", "--spec-file", path("spec.txt"), "--out-x", path("x.gsf"),
                           "--out-y", path("y.gsf"), "--out-gt", path("gt.txt")});
    REQUIRE(r.code == 0);
  }

 private:
  fs::path dir_;
  static inline int counter_ = 0;
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(invoke({}).code == cli::kUsageError);
  CHECK(invoke({"frobnicate"}).code == cli::kUsageError);
  CHECK(invoke({"eval", "--features-x", "a"}).code == cli::kUsageError);
  CHECK(invoke({"gradcheck", "--metric", "triangle"}).code == cli::kUsageError);
  CHECK(invoke({"gradcheck", "--bogus-flag", "1"}).code == cli::kUsageError);
  CHECK(invoke({"gradcheck", "--metric", "cosine"}).code == cli::kUsageError);
  CHECK(invoke({"gradcheck", "--metric", "bdiag", "--dim", "16", "--block-size", "5"}).code ==
        cli::kUsageError);
  const auto help = invoke({"gradcheck", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("1024") != std::string::npos);
}

TEST_CASE("gradcheck subcommand") {
  const auto r = invoke({"gradcheck", "--metric", "diag", "--dim", "16", "--loss", "triplet",
                         "--trials", "100"});
  CHECK(r.code == 0);
  CHECK(r.out.find("status=PASS") != std::string::npos);
  CHECK(r.out.find("trials=100") != std::string::npos);
  const auto strict = invoke({"gradcheck", "--metric", "diag", "--dim", "8", "--trials", "3",
                              "--tolerance", "1e-30"});
  CHECK(strict.code == cli::kNumericError);
}

TEST_CASE("identity checkpoint and zero-epoch training reproduce cosine") {
  Workspace ws;
  ws.synth();
  const auto cosine = invoke({"eval", "--features-x", ws.path("x.gsf"), "--features-y",
                              ws.path("y.gsf"), "--gt", ws.path("gt.txt")});
  REQUIRE(cosine.code == 0);
  CHECK(cosine.out.find("rsum=") != std::string::npos);

  save_checkpoint(ws.path("ident.gsw"), init_identity<float>(MetricConfig::block_diag(16, 4)));
  const auto ident = invoke({"eval", "--features-x", ws.path("x.gsf"), "--features-y",
                             ws.path("y.gsf"), "--ckpt", ws.path("ident.gsw")});
  CHECK(ident.code == 0);
  CHECK(ident.out == cosine.out);

  const auto trained = invoke({"train", "--features-x", ws.path("x.gsf"), "--features-y",
                               ws.path("y.gsf"), "--metric", "bdiag", "--block-size", "4",
                               "--epochs", "0", "--out", ws.path("zero.gsw")});
  REQUIRE(trained.code == 0);
  const auto zero = invoke({"eval", "--features-x", ws.path("x.gsf"), "--features-y",
                            ws.path("y.gsf"), "--ckpt", ws.path("zero.gsw")});
  CHECK(zero.out == cosine.out);
}

TEST_CASE("train, eval, inspect pipeline is reproducible") {
  Workspace ws;
  ws.synth();
  auto train_once = [&](const std::string& out) {
    return invoke({"train", "--features-x", ws.path("x.gsf"), "--features-y", ws.path("y.gsf"),
                   "--metric", "bdiag", "--block-ratio", "4", "--loss", "infonce", "--temp",
                   "0.1", "--epochs", "3", "--batch", "32", "--lr", "0.01", "--seed", "5",
                   "--out", ws.path(out)});
  };
  const auto a = train_once("a.gsw");
  const auto b = train_once("b.gsw");
  REQUIRE(a.code == 0);
  // identical apart from the checkpoint path line
  auto strip_path = [](std::string text) {
    const auto at = text.find("checkpoint=");
    if (at != std::string::npos) text.erase(at, text.find('\n', at) + 1 - at);
    return text;
  };
  CHECK(strip_path(a.out) == strip_path(b.out));
  CHECK(a.out.find("epoch=3 loss=") != std::string::npos);
  CHECK(read_file(ws.path("a.gsw")) == read_file(ws.path("b.gsw")));

  const auto ev = invoke({"eval", "--features-x", ws.path("x.gsf"), "--features-y",
                          ws.path("y.gsf"), "--ckpt", ws.path("a.gsw"), "--table",
                          ws.path("report.tsv")});
  CHECK(ev.code == 0);
  CHECK(read_text(ws.path("report.tsv")).rfind("metric\tvalue\n", 0) == 0);
  for (const char* side : {"left", "right"}) {
    const auto pp = invoke({"eval", "--features-x", ws.path("x.gsf"), "--features-y",
                            ws.path("y.gsf"), "--ckpt", ws.path("a.gsw"), "--pre-project", side});
    CHECK(pp.code == 0);
  }

  const auto info = invoke({"inspect", "--ckpt", ws.path("a.gsw")});
  CHECK(info.code == 0);
  CHECK(info.out.find("variant=bdiag\ndim=16\nblock_size=4\nparams=64\n") == 0);
  CHECK(info.out.find("diag_mass=") != std::string::npos);
}

TEST_CASE("config file supplies options and flags win") {
  Workspace ws;
  ws.synth();
  write_text(ws.path("train.ini"), "# training setup\nepochs=2\nbatch=16\nmetric=diag\nlr=0.001\n");
  const auto r = invoke({"train", "--config", ws.path("train.ini"), "--features-x",
                         ws.path("x.gsf"), "--features-y", ws.path("y.gsf"), "--epochs", "1",
                         "--out", ws.path("c.gsw")});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("epoch=1 ") != std::string::npos);
  CHECK(r.out.find("epoch=2 ") == std::string::npos);
  CHECK(load_checkpoint(ws.path("c.gsw")).config == MetricConfig::diag(16));

  const auto missing = invoke({"train", "--config", ws.path("none.ini"), "--features-x",
                               ws.path("x.gsf"), "--features-y", ws.path("y.gsf"), "--out",
                               ws.path("d.gsw")});
  CHECK(missing.code == cli::kFormatError);
  CHECK(missing.err.find("none.ini") != std::string::npos);
}

TEST_CASE("file problems map to exit code 3 with the path") {
  Workspace ws;
  ws.synth();
  const auto missing = invoke({"eval", "--features-x", ws.path("nope.gsf"), "--features-y",
                               ws.path("y.gsf")});
  CHECK(missing.code == cli::kFormatError);
  CHECK(missing.err.find("nope.gsf") != std::string::npos);

  auto bytes = read_file(ws.path("x.gsf"));
  bytes[0] = 'Z';
  write_file(ws.path("bad.gsf"), bytes);
  const auto bad = invoke({"eval", "--features-x", ws.path("bad.gsf"), "--features-y",
                           ws.path("y.gsf")});
  CHECK(bad.code == cli::kFormatError);
  CHECK(bad.err.find("bad.gsf") != std::string::npos);
  CHECK(bad.err.find("bad magic") != std::string::npos);

  save_checkpoint(ws.path("c.gsw"), init_identity<float>(MetricConfig::diag(16)));
  auto ck = read_file(ws.path("c.gsw"));
  ck[16] ^= 0x10;
  write_file(ws.path("c.gsw"), ck);
  const auto crc = invoke({"inspect", "--ckpt", ws.path("c.gsw")});
  CHECK(crc.code == cli::kFormatError);
  CHECK(crc.err.find("checksum") != std::string::npos);
}

TEST_CASE("application subcommands") {
  Workspace ws;
  ws.synth(12, 16);
  const auto align = invoke({"align", "--a", ws.path("x.gsf"), "--b", ws.path("x.gsf"),
                             "--strategy", "maxsum"});
  CHECK(align.code == 0);
  CHECK(align.out.find("score=12.000000") != std::string::npos);

  const auto att = invoke({"attention", "--q", ws.path("x.gsf"), "--k", ws.path("y.gsf"), "--v",
                           ws.path("y.gsf"), "--out", ws.path("att.gsf"), "--metric", "diag"});
  CHECK(att.code == 0);
  CHECK(read_features(ws.path("att.gsf")).features.values.rows() == 12);

  const auto same = invoke({"distill", "--teacher-x", ws.path("x.gsf"), "--teacher-y",
                            ws.path("y.gsf"), "--student-x", ws.path("x.gsf"), "--student-y",
                            ws.path("y.gsf"), "--task-loss", "0.5"});
  CHECK(same.code == 0);
  CHECK(same.out == "kl=0.000000000\ntotal=0.500000000\n");

  const auto stats = invoke({"stats", "--features-x", ws.path("x.gsf"), "--features-y",
                             ws.path("y.gsf"), "--bins", "10", "--out-pos", ws.path("pos.txt"),
                             "--out-neg", ws.path("neg.txt")});
  CHECK(stats.code == 0);
  std::size_t pos = 0, neg = 0;
  std::istringstream p(read_text(ws.path("pos.txt"))), n(read_text(ws.path("neg.txt")));
  double center;
  std::size_t count;
  int lines = 0;
  while (p >> center >> count) { pos += count; ++lines; }
  while (n >> center >> count) neg += count;
  CHECK(lines == 10);
  CHECK(pos == 12);
  CHECK(neg == 12 * 11);
}

TEST_CASE("the installed binary reports exit codes") {
  const std::string tool = BLOCKMETRIC_TOOL_PATH;
  CHECK(std::system((tool + " inspect > /dev/null 2>&1").c_str()) != 0);
  CHECK(std::system((tool + " gradcheck --metric diag --dim 8 --trials 5 > /dev/null").c_str()) == 0);
}
