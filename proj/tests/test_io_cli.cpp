#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dvsci/cli.hpp"
#include "dvsci/io/artifacts.hpp"
#include "dvsci/io/container.hpp"
#include "dvsci/io/image_io.hpp"
#include "dvsci/rng.hpp"
#include "oracles.hpp"

using namespace dvsci;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const char* s) const { return (path / s).string(); }
};

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  return std::vector<char>(std::istreambuf_iterator<char>(f),
                           std::istreambuf_iterator<char>());
}

int run(std::initializer_list<std::string> args) {
  return cli::run(std::vector<std::string>(args));
}

}  // namespace

TEST_CASE("container round-trips tensors and attributes bit-exactly") {
  TempDir tmp("dvsci_container_rt");
  Rng rng(1);
  io::Container c;
  Tensor t = oracle::random_tensor(3, 7, 5, rng, -10.0, 10.0);
  TensorU8 u(2, 4, 4);
  for (auto& x : u.v) x = rng.next_u32() % 2;
  c.put("video", t);
  c.put("patterns", u);
  c.set_attr("note", "alpha beta");
  c.set_attr("sigma", 0.05);
  c.save(tmp.path / "art");

  io::Container back = io::Container::load(tmp.path / "art");
  CHECK(back.get_f32("video").v == t.v);
  CHECK(back.get_u8("patterns").v == u.v);
  CHECK(back.attr("note") == "alpha beta");
  CHECK(back.attr_double("sigma") == 0.05);
  CHECK(back.tensor_names() == std::vector<std::string>{"video", "patterns"});

  CHECK_THROWS_AS(back.get_f32("missing"), std::invalid_argument);
  CHECK_THROWS_AS(back.get_u8("video"), std::invalid_argument);
  CHECK_THROWS_AS(back.attr("missing"), std::invalid_argument);
  CHECK_THROWS_AS(io::Container::load(tmp.path / "nowhere"),
                  std::invalid_argument);
}

TEST_CASE("domain artifacts round-trip through their containers") {
  TempDir tmp("dvsci_artifacts_rt");
  core::MaskSet m = core::generate_masks(8, 10, 3, 0.4, {2, 3}, 17);
  io::save_masks(tmp.path / "m", m, "beef");
  core::MaskSet m2 = io::load_masks(tmp.path / "m");
  CHECK(m2.c1.v == m.c1.v);
  CHECK(m2.c2.v == m.c2.v);
  CHECK(m2.shift == m.shift);
  CHECK(m2.id() == m.id());

  Rng rng(3);
  core::VideoCube cube{oracle::random_tensor(3, 8, 10, rng), core::ViewId::kView2};
  io::save_cube(tmp.path / "cube", cube);
  core::VideoCube cube2 = io::load_cube(tmp.path / "cube");
  CHECK(cube2.data.v == cube.data.v);
  CHECK(cube2.view == core::ViewId::kView2);

  core::Measurement meas;
  meas.y = oracle::random_tensor(1, 8, 10, rng, 0.0, 4.0);
  meas.meta.frames_per_view = 3;
  meas.meta.mask_ref = m.id();
  meas.meta.noise_sigma = 0.05f;
  meas.meta.normalized = true;
  meas.meta.scale = 3.25f;
  io::save_measurement(tmp.path / "y", meas, "beef", 9);
  core::Measurement meas2 = io::load_measurement(tmp.path / "y");
  CHECK(meas2.y.v == meas.y.v);
  CHECK(meas2.meta.mask_ref == m.id());
  CHECK(meas2.meta.scale == 3.25f);
  CHECK(meas2.meta.normalized);
}

TEST_CASE("pnm reading and luma conversion") {
  TempDir tmp("dvsci_pnm");
  {
    std::ofstream f(tmp.path / "a.pgm", std::ios::binary);
    f << "P5\n# comment\n3 2\n255\n";
    for (int i = 0; i < 6; ++i) f.put(static_cast<char>(40 * i));
  }
  Tensor g = io::read_pnm(tmp.path / "a.pgm");
  CHECK(g.chans == 1);
  CHECK(g.rows == 2);
  CHECK(g.cols == 3);
  CHECK(g.at(0, 0, 1) == doctest::Approx(40.0 / 255).epsilon(1e-6));

  {
    std::ofstream f(tmp.path / "b.ppm");
    f << "P3\n2 1\n255\n255 0 0  0 255 0\n";
  }
  Tensor c = io::read_pnm(tmp.path / "b.ppm");
  CHECK(c.chans == 3);
  Tensor gray = io::to_gray(c);
  CHECK(gray.at(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-6));
  CHECK(gray.at(0, 0, 1) == doctest::Approx(0.587).epsilon(1e-6));

  {
    std::ofstream f(tmp.path / "bad.pgm", std::ios::binary);
    f << "P5\n3 2\n255\nxx";  // truncated
  }
  CHECK_THROWS_AS(io::read_pnm(tmp.path / "bad.pgm"), std::runtime_error);
}

TEST_CASE("png writer emits a well-formed signature and chunks") {
  TempDir tmp("dvsci_png");
  Rng rng(5);
  io::write_png(tmp.path / "g.png", oracle::random_tensor(1, 9, 13, rng));
  io::write_png(tmp.path / "c.png", oracle::random_tensor(3, 9, 13, rng));
  std::vector<char> bytes = read_bytes(tmp.path / "g.png");
  REQUIRE(bytes.size() > 45);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  for (int i = 0; i < 8; ++i)
    CHECK(static_cast<unsigned char>(bytes[i]) == sig[i]);
  CHECK(std::string(bytes.begin() + 12, bytes.begin() + 16) == "IHDR");
  CHECK(std::string(bytes.end() - 8, bytes.end() - 4) == "IEND");
}

TEST_CASE("cli pipeline: masks, scenes, snapshot, decoding, metrics") {
  TempDir tmp("dvsci_cli_pipeline");
  CHECK(run({"mask-gen", "--out", tmp.sub("masks"), "--rows", "16", "--cols",
             "16", "--frames", "2", "--seed", "3"}) == 0);
  CHECK(run({"scene-gen", "--out1", tmp.sub("s1"), "--out2", tmp.sub("s2"),
             "--rows", "16", "--cols", "16", "--frames", "2", "--seed", "5"}) == 0);
  CHECK(run({"simulate", "--scene1", tmp.sub("s1"), "--scene2", tmp.sub("s2"),
             "--masks", tmp.sub("masks"), "--out", tmp.sub("meas"), "--seed",
             "7"}) == 0);

  // The stored snapshot equals an in-process encode with the same seeds.
  core::MaskSet masks = io::load_masks(tmp.sub("masks"));
  core::VideoCube s1 = io::load_cube(tmp.sub("s1"));
  core::VideoCube s2 = io::load_cube(tmp.sub("s2"));
  core::Measurement expect = core::encode(s1, s2, masks, 0.0f, 7);
  core::Measurement got = io::load_measurement(tmp.sub("meas"));
  CHECK(got.y.v == expect.y.v);

  CHECK(run({"amplify", "--measurement", tmp.sub("meas"), "--masks",
             tmp.sub("masks"), "--out", tmp.sub("amp"), "--sigma-g", "1.5",
             "--radius", "5"}) == 0);
  CHECK(fs::exists(tmp.path / "amp" / "ybar.png"));
  io::Container amp_art = io::Container::load(tmp.sub("amp"));
  CHECK(amp_art.has_tensor("d4"));

  CHECK(run({"reconstruct", "--algo", "gaptv", "--measurement", tmp.sub("meas"),
             "--masks", tmp.sub("masks"), "--out", tmp.sub("rec"), "--iters",
             "10"}) == 0);
  CHECK(fs::exists(tmp.path / "rec" / "residuals.csv"));
  CHECK(run({"evaluate", "--ref1", tmp.sub("s1"), "--ref2", tmp.sub("s2"),
             "--est1", tmp.sub("rec/est1"), "--est2", tmp.sub("rec/est2"),
             "--out", tmp.sub("eval")}) == 0);
  CHECK(fs::exists(tmp.path / "eval" / "report.txt"));
  CHECK(fs::exists(tmp.path / "eval" / "framewise.csv"));
}

TEST_CASE("cli rejects invalid inputs with the validation exit code") {
  TempDir tmp("dvsci_cli_errors");
  CHECK(run({"mask-gen", "--out", tmp.sub("m"), "--rows", "8", "--cols", "8",
             "--frames", "1", "--shift-row", "0", "--shift-col", "0"}) == 2);
  CHECK(run({"reconstruct", "--algo", "nonsense", "--measurement", "x",
             "--masks", "y", "--out", "z"}) == 2);
  CHECK(run({"simulate", "--scene1", tmp.sub("missing"), "--masks",
             tmp.sub("m2"), "--out", tmp.sub("o")}) == 2);
  CHECK(run({"ablate", "--out", tmp.sub("a"), "--flags", "bogus_flag"}) == 2);
}

TEST_CASE("cli commands re-run with identical seeds reproduce artifacts bit-exactly") {
  TempDir tmp("dvsci_cli_det");
  auto once = [&](const char* tag) {
    const std::string masks = tmp.sub((std::string("m") + tag).c_str());
    const std::string s1 = tmp.sub((std::string("s1") + tag).c_str());
    const std::string s2 = tmp.sub((std::string("s2") + tag).c_str());
    const std::string meas = tmp.sub((std::string("y") + tag).c_str());
    const std::string rec = tmp.sub((std::string("r") + tag).c_str());
    REQUIRE(run({"mask-gen", "--out", masks, "--rows", "16", "--cols", "16",
                 "--frames", "2", "--seed", "11"}) == 0);
    REQUIRE(run({"scene-gen", "--out1", s1, "--out2", s2, "--rows", "16",
                 "--cols", "16", "--frames", "2", "--seed", "13"}) == 0);
    REQUIRE(run({"simulate", "--scene1", s1, "--scene2", s2, "--masks", masks,
                 "--out", meas, "--noise-sigma", "0.05", "--seed", "17"}) == 0);
    REQUIRE(run({"reconstruct", "--algo", "gaptv", "--measurement", meas,
                 "--masks", masks, "--out", rec, "--iters", "5"}) == 0);
    return read_bytes(fs::path(rec) / "est1" / "data.f32");
  };
  CHECK(once("a") == once("b"));
}

TEST_CASE("cli single-view mode round-trips") {
  TempDir tmp("dvsci_cli_single");
  REQUIRE(run({"mask-gen", "--out", tmp.sub("m"), "--rows", "16", "--cols",
               "16", "--frames", "3", "--seed", "19"}) == 0);
  REQUIRE(run({"scene-gen", "--out1", tmp.sub("s"), "--rows", "16", "--cols",
               "16", "--frames", "3", "--seed", "23"}) == 0);
  REQUIRE(run({"simulate", "--mode", "single", "--scene1", tmp.sub("s"),
               "--masks", tmp.sub("m"), "--out", tmp.sub("y")}) == 0);
  REQUIRE(run({"reconstruct", "--algo", "gaptv", "--mode", "single",
               "--measurement", tmp.sub("y"), "--masks", tmp.sub("m"), "--out",
               tmp.sub("r"), "--iters", "5"}) == 0);
  CHECK(run({"evaluate", "--mode", "single", "--ref1", tmp.sub("s"), "--est1",
             tmp.sub("r/est1"), "--out", tmp.sub("e")}) == 0);
}

TEST_CASE("cli ablate emits one row per requested variant") {
  TempDir tmp("dvsci_cli_ablate");
  REQUIRE(run({"ablate", "--out", tmp.sub("a"), "--rows", "16", "--cols", "16",
               "--frames", "2", "--width-scale", "0.125", "--seed", "29",
               "--flow-iters", "5", "--flow-levels", "2"}) == 0);
  std::ifstream f(tmp.path / "a" / "ablate.csv");
  REQUIRE(f);
  std::string line;
  std::getline(f, line);
  CHECK(line == "variant,psnr_db,ssim,seconds");
  int rows = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("cli sweep writes the protocol tables") {
  TempDir tmp("dvsci_cli_sweep");
  REQUIRE(run({"sweep", "--type", "noise", "--algo", "gaptv", "--out",
               tmp.sub("n"), "--rows", "16", "--cols", "16", "--frames", "2",
               "--pairs", "1", "--iters", "5", "--sigmas", "0,0.05"}) == 0);
  std::ifstream f(tmp.path / "n" / "noise_sweep.csv");
  REQUIRE(f);
  std::string header;
  std::getline(f, header);
  CHECK(header.find("sigma") == 0);
  int rows = 0;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);

  REQUIRE(run({"sweep", "--type", "rate", "--algo", "gaptv", "--out",
               tmp.sub("r"), "--rows", "16", "--cols", "16", "--pairs", "1",
               "--iters", "5", "--frames-list", "2,4"}) == 0);
  std::ifstream g(tmp.path / "r" / "rate_sweep.csv");
  REQUIRE(g);
  std::getline(g, header);
  rows = 0;
  while (std::getline(g, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("cli training writes checkpoints, logs, and provenance") {
  TempDir tmp("dvsci_cli_train");
  REQUIRE(run({"train", "--out", tmp.sub("run"), "--corpus", "synth", "--rows",
               "8", "--cols", "8", "--frames", "2", "--pairs", "2", "--epochs",
               "1", "--batch", "2", "--width-scale", "0.125", "--seed", "31",
               "--flow-iters", "5", "--flow-levels", "2", "--max-steps", "1"}) == 0);
  CHECK(fs::exists(tmp.path / "run" / "train.log"));
  CHECK(fs::exists(tmp.path / "run" / "checkpoint-final" / "manifest.txt"));
  CHECK(fs::exists(tmp.path / "run" / "provenance.txt"));

  // Reconstruct with the trained weights through the net path.
  REQUIRE(run({"mask-gen", "--out", tmp.sub("m"), "--rows", "8", "--cols", "8",
               "--frames", "2", "--seed", "0"}) == 0);
  REQUIRE(run({"scene-gen", "--out1", tmp.sub("s1"), "--out2", tmp.sub("s2"),
               "--rows", "8", "--cols", "8", "--frames", "2", "--seed", "33"}) == 0);
  REQUIRE(run({"simulate", "--scene1", tmp.sub("s1"), "--scene2", tmp.sub("s2"),
               "--masks", tmp.sub("m"), "--out", tmp.sub("y")}) == 0);
  REQUIRE(run({"reconstruct", "--algo", "net", "--measurement", tmp.sub("y"),
               "--masks", tmp.sub("m"), "--out", tmp.sub("r"), "--weights",
               tmp.sub("run/checkpoint-final"), "--width-scale", "0.125",
               "--flow-iters", "5", "--flow-levels", "2", "--dump-flows",
               tmp.sub("flows")}) == 0);
  CHECK(fs::exists(tmp.path / "r" / "est1" / "manifest.txt"));
  CHECK(fs::exists(tmp.path / "r" / "est2" / "manifest.txt"));
  io::Container flows = io::Container::load(tmp.sub("flows"));
  CHECK(flows.get_f32("fwd1_0").chans == 2);
  CHECK(fs::exists(tmp.path / "flows" / "bwd2_0.png"));
}

TEST_CASE("cli plug-and-play path accepts the pluggable denoisers") {
  TempDir tmp("dvsci_cli_pnp");
  REQUIRE(run({"mask-gen", "--out", tmp.sub("m"), "--rows", "16", "--cols",
               "16", "--frames", "2", "--seed", "37"}) == 0);
  REQUIRE(run({"scene-gen", "--out1", tmp.sub("s1"), "--out2", tmp.sub("s2"),
               "--rows", "16", "--cols", "16", "--frames", "2", "--seed",
               "41"}) == 0);
  REQUIRE(run({"simulate", "--scene1", tmp.sub("s1"), "--scene2", tmp.sub("s2"),
               "--masks", tmp.sub("m"), "--out", tmp.sub("y")}) == 0);
  for (const char* denoiser : {"tv", "gauss", "identity"}) {
    REQUIRE(run({"reconstruct", "--algo", "pnp-tv", "--denoiser", denoiser,
                 "--measurement", tmp.sub("y"), "--masks", tmp.sub("m"),
                 "--out", tmp.sub(denoiser), "--iters", "4"}) == 0);
  }
  // The built-in TV denoiser reproduces the gaptv trajectory bit-for-bit.
  REQUIRE(run({"reconstruct", "--algo", "gaptv", "--measurement", tmp.sub("y"),
               "--masks", tmp.sub("m"), "--out", tmp.sub("g"), "--iters",
               "4"}) == 0);
  CHECK(read_bytes(tmp.path / "tv" / "est1" / "data.f32") ==
        read_bytes(tmp.path / "g" / "est1" / "data.f32"));
}
