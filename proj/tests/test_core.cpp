// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include <echoone/core/archive.hpp>
#include <echoone/core/hash.hpp>
#include <echoone/core/image.hpp>
#include <echoone/core/rng.hpp>
#include <echoone/core/tensor.hpp>
#include <echoone/harmonize/mhd_io.hpp>

using namespace echoone;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "echoone_core" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t(Shape{2, 3, 4});
  CHECK(t.rank() == 3);
  CHECK(t.dim(0) == 2);
  CHECK(t.size() == 24);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  CHECK(t.at(0, 0, 0) == 0.0f);
  CHECK(t.at(0, 0, 3) == 3.0f);
  CHECK(t.at(0, 1, 0) == 4.0f);  // row-major: last index fastest
  CHECK(t.at(1, 0, 0) == 12.0f);

  Tensor<float> r = t.reshaped(Shape{6, 4});
  CHECK(r.rank() == 2);
  CHECK(r.at(1, 0) == 4.0f);  // same flat order

  Tensor<double> d = t.cast<double>();
  CHECK(d.at(1, 2, 3) == doctest::Approx(23.0));
}

TEST_CASE("rng sequences are reproducible and state restores mid-stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(7);
  for (int i = 0; i < 5; ++i) c.uniform();
  const std::uint64_t snap = c.state();
  std::vector<double> tail;
  for (int i = 0; i < 10; ++i) tail.push_back(c.uniform());
  c.set_state(snap);
  for (int i = 0; i < 10; ++i) CHECK(c.uniform() == tail[static_cast<size_t>(i)]);
}

TEST_CASE("rng uniform stays in range and shuffle permutes") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-2.0, 5.0);
    CHECK(u >= -2.0);
    CHECK(u < 5.0);
  }
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v.begin(), v.end());
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
}

TEST_CASE("fnv1a64 matches published vectors") {
  // Reference values for the 64-bit FNV-1a function.
  CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64(std::string("foobar")) == 0x85944171f73967e8ULL);
  CHECK(hash_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
  CHECK(hash_hex(0) == "0000000000000000");
}

TEST_CASE("file_hash_hex chains over chunks like the in-memory hash") {
  const fs::path dir = temp_dir("hash");
  const std::string content(200000, 'x');
  {
    std::ofstream out(dir / "big.bin", std::ios::binary);
    out << content;
  }
  CHECK(file_hash_hex((dir / "big.bin").string()) == hash_hex(fnv1a64(content)));
}

TEST_CASE("archive round-trips every dtype with shapes and metadata") {
  const fs::path dir = temp_dir("archive");
  const std::string path = (dir / "a.bin").string();

  Archive ar("TEST-TAG-v1");
  ar.meta()["alpha"] = 3;
  ar.meta()["name"] = "hello";
  Tensor<float> tf(Shape{2, 3});
  for (Eigen::Index i = 0; i < 6; ++i) tf[i] = static_cast<float>(i) * 0.5f;
  Tensor<double> td(Shape{4});
  for (Eigen::Index i = 0; i < 4; ++i) td[i] = i * 1e-10;
  ar.add_f32("w", tf);
  ar.add_f64("d", td);
  ar.add_i32("ids", {5, -7, 9}, Shape{3});
  ar.add_u8("bytes", {1, 2, 255});
  ar.add_u64("big", {0xffffffffffffffffULL, 3});
  ar.save(path);

  Archive back = Archive::load(path);
  CHECK(back.tag() == "TEST-TAG-v1");
  CHECK(back.meta().at("alpha").get<int>() == 3);
  CHECK(back.meta().at("name").get<std::string>() == "hello");
  Tensor<float> wf = back.blob("w").as_f32();
  REQUIRE(wf.shape() == Shape{2, 3});
  CHECK(wf.at(1, 2) == 2.5f);
  Tensor<double> dd = back.blob("d").as_f64();
  CHECK(dd[2] == 2e-10);
  CHECK(back.blob("ids").as_i32() == std::vector<std::int32_t>{5, -7, 9});
  CHECK(back.blob("bytes").as_u8() == std::vector<std::uint8_t>{1, 2, 255});
  CHECK(back.blob("big").as_u64()[0] == 0xffffffffffffffffULL);
}

TEST_CASE("archive writes are byte-identical and tags are enforced") {
  const fs::path dir = temp_dir("archive2");
  Archive ar("TEST-TAG-v1");
  ar.meta()["k"] = 1;
  Tensor<float> t(Shape{8});
  t.array().setConstant(0.25f);
  ar.add_f32("t", t);
  ar.save((dir / "one.bin").string());
  ar.save((dir / "two.bin").string());
  CHECK(file_hash_hex((dir / "one.bin").string()) ==
        file_hash_hex((dir / "two.bin").string()));

  CHECK_NOTHROW(Archive::load_expect((dir / "one.bin").string(), "TEST-TAG-v1"));
  CHECK_THROWS_AS(Archive::load_expect((dir / "one.bin").string(), "OTHER-TAG-v1"),
                  DataError);
  CHECK_THROWS_AS(Archive::load((dir / "missing.bin").string()), DataError);
}

TEST_CASE("archive rejects truncated files") {
  const fs::path dir = temp_dir("archive3");
  Archive ar("TEST-TAG-v1");
  Tensor<float> t(Shape{64});
  t.array().setConstant(1.0f);
  ar.add_f32("t", t);
  const std::string path = (dir / "full.bin").string();
  ar.save(path);
  std::vector<char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  {
    std::ofstream out(dir / "cut.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(Archive::load((dir / "cut.bin").string()), DataError);
}

TEST_CASE("png gray round-trip preserves every byte") {
  const fs::path dir = temp_dir("png");
  GrayImage img(13, 17);
  Rng rng(9);
  for (auto& p : img.pix) p = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  const std::string path = (dir / "img.png").string();
  write_png_gray(path, img);
  GrayImage back = read_png_gray(path);
  REQUIRE(back.h == 13);
  REQUIRE(back.w == 17);
  CHECK(back.pix == img.pix);
}

TEST_CASE("png rgb writes a readable file") {
  const fs::path dir = temp_dir("png_rgb");
  RgbImage img(4, 5);
  img.at(2, 3, 0) = 200;
  img.at(2, 3, 2) = 100;
  const std::string path = (dir / "rgb.png").string();
  write_png_rgb(path, img);
  CHECK(fs::file_size(path) > 0);
  // The gray reader converts RGB; spot-check the converted pixel is nonzero.
  GrayImage back = read_png_gray(path);
  CHECK(back.h == 4);
  CHECK(back.w == 5);
  CHECK(back.at(2, 3) > 0);
}

TEST_CASE("resize helpers: identity at native size, nearest replicates") {
  GrayImage img(5, 7);
  Rng rng(2);
  for (auto& p : img.pix) p = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  CHECK(resize_bilinear_u8(img, 5, 7).pix == img.pix);
  CHECK(resize_nearest_u8(img, 5, 7).pix == img.pix);

  GrayImage two(2, 2);
  two.at(0, 0) = 10;
  two.at(0, 1) = 20;
  two.at(1, 0) = 30;
  two.at(1, 1) = 40;
  GrayImage up = resize_nearest_u8(two, 4, 4);
  // Half-pixel centers map each output quadrant onto one source pixel.
  CHECK(up.at(0, 0) == 10);
  CHECK(up.at(0, 3) == 20);
  CHECK(up.at(3, 0) == 30);
  CHECK(up.at(3, 3) == 40);
  CHECK(up.at(1, 1) == 10);
  CHECK(up.at(2, 2) == 40);
}

TEST_CASE("image_to_tensor scales into the unit interval") {
  GrayImage img(1, 3);
  img.at(0, 0) = 0;
  img.at(0, 1) = 255;
  img.at(0, 2) = 51;
  Tensor<float> t = image_to_tensor<float>(img);
  CHECK(t[0] == 0.0f);
  CHECK(t[1] == 1.0f);
  CHECK(t[2] == doctest::Approx(0.2f));
}

TEST_CASE("mhd reader handles uchar and short with local raw file") {
  const fs::path dir = temp_dir("mhd");
  {
    std::ofstream h(dir / "u.mhd");
    h << "ObjectType = Image\nNDims = 2\nDimSize = 3 2\n"
      << "ElementType = MET_UCHAR\nElementDataFile = u.raw\n";
    std::ofstream r(dir / "u.raw", std::ios::binary);
    const unsigned char data[6] = {0, 50, 100, 150, 200, 250};
    r.write(reinterpret_cast<const char*>(data), 6);
  }
  GrayImage img = read_mhd_gray((dir / "u.mhd").string());
  REQUIRE(img.w == 3);  // DimSize lists the fastest axis first
  REQUIRE(img.h == 2);
  CHECK(img.at(0, 0) == 0);
  CHECK(img.at(0, 2) == 100);
  CHECK(img.at(1, 2) == 250);

  {
    std::ofstream h(dir / "s.mhd");
    h << "ObjectType = Image\nNDims = 3\nDimSize = 2 2 1\n"
      << "ElementType = MET_SHORT\nElementDataFile = s.raw\n";
    std::ofstream r(dir / "s.raw", std::ios::binary);
    const std::int16_t data[4] = {-5, 0, 128, 300};
    r.write(reinterpret_cast<const char*>(data), 8);
  }
  GrayImage s = read_mhd_gray((dir / "s.mhd").string());
  CHECK(s.at(0, 0) == 0);    // clamped below
  CHECK(s.at(0, 1) == 0);
  CHECK(s.at(1, 0) == 128);
  CHECK(s.at(1, 1) == 255);  // clamped above
}

TEST_CASE("mhd reader rejects what it cannot represent") {
  const fs::path dir = temp_dir("mhd_bad");
  auto write_header = [&](const char* name, const std::string& body) {
    std::ofstream h(dir / name);
    h << body;
  };
  write_header("compressed.mhd",
               "NDims = 2\nDimSize = 2 2\nCompressedData = True\n"
               "ElementType = MET_UCHAR\nElementDataFile = x.raw\n");
  CHECK_THROWS_AS(read_mhd_gray((dir / "compressed.mhd").string()), DataError);

  write_header("volume.mhd",
               "NDims = 3\nDimSize = 2 2 4\n"
               "ElementType = MET_UCHAR\nElementDataFile = x.raw\n");
  CHECK_THROWS_AS(read_mhd_gray((dir / "volume.mhd").string()), DataError);

  write_header("list.mhd",
               "NDims = 2\nDimSize = 2 2\n"
               "ElementType = MET_UCHAR\nElementDataFile = LIST\n");
  CHECK_THROWS_AS(read_mhd_gray((dir / "list.mhd").string()), DataError);

  write_header("trunc.mhd",
               "NDims = 2\nDimSize = 4 4\n"
               "ElementType = MET_UCHAR\nElementDataFile = t.raw\n");
  {
    std::ofstream r(dir / "t.raw", std::ios::binary);
    r << "abc";  // 3 bytes < 16
  }
  CHECK_THROWS_AS(read_mhd_gray((dir / "trunc.mhd").string()), DataError);
}
