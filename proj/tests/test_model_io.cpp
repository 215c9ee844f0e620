#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "dcm/errors.hpp"
#include "dcm/model_io.hpp"

using namespace dcm;

namespace {

std::filesystem::path temp_dir() {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("dcm_io_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

Checkpoint sample_checkpoint() {
  std::mt19937_64 rng(3);
  Checkpoint ckpt;
  ckpt.config_text = "model.head = prototype\ntrain.seed = 1\n";
  ckpt.params.push_back(Parameter{"feature.0.weight", Tensor::randn({2, 4}, rng)});
  ckpt.params.push_back(Parameter{"centers.0", Tensor::randn({1, 4}, rng)});
  ckpt.params.push_back(Parameter{"centers.1", Tensor::randn({3, 4}, rng, 0.01)});
  return ckpt;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint round-trip restores config exactly and values to f32") {
  auto dir = temp_dir();
  auto path = (dir / "m.dcm").string();
  Checkpoint ckpt = sample_checkpoint();
  save_checkpoint(path, ckpt);

  Checkpoint back = load_checkpoint(path);
  CHECK(back.config_text == ckpt.config_text);
  REQUIRE(back.params.size() == ckpt.params.size());
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    CHECK(back.params[i].name == ckpt.params[i].name);
    REQUIRE(back.params[i].value.shape() == ckpt.params[i].value.shape());
    for (std::size_t j = 0; j < ckpt.params[i].value.size(); ++j) {
      // deviation is exactly the 64->32-bit rounding
      double expected = static_cast<double>(static_cast<float>(ckpt.params[i].value[j]));
      CHECK(back.params[i].value[j] == expected);
    }
  }

  // saving the loaded checkpoint again is byte-identical (f32 is a fixed point)
  auto path2 = (dir / "m2.dcm").string();
  save_checkpoint(path2, back);
  CHECK(read_file(path) == read_file(path2));
  std::filesystem::remove_all(dir);
}

TEST_CASE("writes are atomic: no temp file left behind") {
  auto dir = temp_dir();
  auto path = (dir / "m.dcm").string();
  save_checkpoint(path, sample_checkpoint());
  CHECK(std::filesystem::exists(path));
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("loader rejects each corruption class") {
  auto dir = temp_dir();
  auto good_path = dir / "good.dcm";
  save_checkpoint(good_path.string(), sample_checkpoint());
  std::string good = read_file(good_path);

  auto expect_format_error = [&](std::string bytes, const char* needle) {
    auto bad = dir / "bad.dcm";
    write_file(bad, bytes);
    try {
      load_checkpoint(bad.string());
      FAIL_CHECK("expected FormatError containing '", needle, "'");
    } catch (const FormatError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                    "message was: ", e.what());
    }
  };

  SUBCASE("bad magic") {
    std::string bytes = good;
    bytes[0] = 'X';
    expect_format_error(bytes, "bad magic");
  }
  SUBCASE("unsupported version names the supported one") {
    std::string bytes = good;
    bytes[4] = 9;
    expect_format_error(bytes, "supported: 1");
  }
  SUBCASE("truncation reports the byte offset") {
    expect_format_error(good.substr(0, good.size() - 5), "truncated");
    expect_format_error(good.substr(0, 10), "truncated");
    expect_format_error("", "truncated");
  }
  SUBCASE("offset past payload") {
    // first parameter's offset field: after magic(4)+version(4)+cfglen(8)+cfg+count(4)
    // +namelen(4)+name(16)+rank(4)+extents(16)
    Checkpoint c = sample_checkpoint();
    std::size_t pos = 4 + 4 + 8 + c.config_text.size() + 4 + 4 + 16 + 4 + 16;
    std::string bytes = good;
    bytes[pos] = static_cast<char>(0xff);  // offset 255, payload only holds 3 tensors
    expect_format_error(bytes, "extends past the payload");
  }
  SUBCASE("overlapping tensors") {
    Checkpoint c = sample_checkpoint();
    // point the second parameter's offset at the first tensor's range
    std::size_t pos = 4 + 4 + 8 + c.config_text.size() + 4;
    pos += 4 + 16 + 4 + 16 + 8;      // first header
    pos += 4 + 9 + 4 + 16;           // second header up to its offset
    std::string bytes = good;
    for (int i = 0; i < 8; ++i) bytes[pos + i] = 0;  // overlap with offset 0
    expect_format_error(bytes, "overlaps");
  }
  SUBCASE("duplicate parameter names") {
    Checkpoint dup = sample_checkpoint();
    dup.params[1].name = dup.params[0].name;
    dup.params[1].value = dup.params[0].value;
    auto p = dir / "dup.dcm";
    save_checkpoint(p.string(), dup);
    CHECK_THROWS_AS(load_checkpoint(p.string()), FormatError);
  }
  SUBCASE("missing file is an io error") {
    CHECK_THROWS_AS(load_checkpoint((dir / "nope.dcm").string()), IoError);
  }
  std::filesystem::remove_all(dir);
}
