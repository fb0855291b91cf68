#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "dpd/io.hpp"
#include "dpd/models.hpp"
#include "dpd/rng.hpp"

using dpd::Record;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

struct FileGuard {
  std::string path;
  ~FileGuard() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("records round-trip bitwise") {
  std::string path = temp_path("dpd_io_roundtrip.dpds");
  FileGuard guard{path};

  auto rng = dpd::make_rng(1, "io");
  std::normal_distribution<double> g(0.0, 1.0);
  Record a;
  a.name = "weights";
  a.dims = {3, 4};
  for (int i = 0; i < 12; ++i) a.f64_data.push_back(g(rng));
  Record b;
  b.name = "labels";
  b.dtype = Record::Dtype::u32;
  b.dims = {5};
  b.u32_data = {0, 1, 2, 3, 4294967295u};

  dpd::write_records(path, {a, b});
  std::vector<Record> back = dpd::read_records(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "weights");
  CHECK(back[0].dims == a.dims);
  CHECK(back[0].f64_data == a.f64_data);  // exact, not approximate
  CHECK(back[1].u32_data == b.u32_data);

  // Rewriting the same records yields an identical file.
  std::string path2 = temp_path("dpd_io_roundtrip2.dpds");
  FileGuard guard2{path2};
  dpd::write_records(path2, back);
  CHECK(dpd::file_hash(path) == dpd::file_hash(path2));
}

TEST_CASE("an empty container is exactly the 16-byte header") {
  std::string path = temp_path("dpd_io_empty.dpds");
  FileGuard guard{path};
  dpd::write_records(path, {});
  CHECK(std::filesystem::file_size(path) == 16);
  CHECK(dpd::read_records(path).empty());
}

TEST_CASE("corruption is reported with a byte offset") {
  std::string path = temp_path("dpd_io_corrupt.dpds");
  FileGuard guard{path};
  Record r;
  r.name = "x";
  r.dims = {2};
  r.f64_data = {1.0, 2.0};
  dpd::write_records(path, {r});

  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
    f.close();
    CHECK_THROWS_WITH_AS(dpd::read_records(path), doctest::Contains("offset 0"),
                         std::runtime_error);
  }
  SUBCASE("truncated payload") {
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
    CHECK_THROWS_AS(dpd::read_records(path), std::runtime_error);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(dpd::read_records(path + ".nope"), std::runtime_error); }
}

TEST_CASE("param trees round-trip through the container") {
  std::string path = temp_path("dpd_io_params.dpds");
  FileGuard guard{path};
  dpd::ParamTree params;
  params["layer0.weight"] = dpd::Tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  params["layer0.bias"] = dpd::Tensor::from_vector({-0.5, 0.25, 0.125});
  dpd::save_param_tree(path, params);
  dpd::ParamTree back = dpd::load_param_tree(path);
  REQUIRE(dpd::same_structure(params, back));
  CHECK(dpd::param_tree_hash(params) == dpd::param_tree_hash(back));
}

TEST_CASE("image sets round-trip with labels and optional modes") {
  std::string path = temp_path("dpd_io_images.dpds");
  FileGuard guard{path};
  std::vector<dpd::ImageSample> images(3);
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i].label = i;
    images[i].pixels.assign(16, 0.25 * static_cast<double>(i));
  }
  dpd::save_image_set(path, images, 4, 4, {0, 1, 0});
  dpd::LoadedImageSet back = dpd::load_image_set(path);
  CHECK(back.height == 4);
  CHECK(back.width == 4);
  REQUIRE(back.images.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.images[i].label == i);
    CHECK(back.images[i].pixels == images[i].pixels);
  }
  CHECK(back.modes == std::vector<std::size_t>{0, 1, 0});

  std::string path2 = temp_path("dpd_io_images2.dpds");
  FileGuard guard2{path2};
  dpd::save_image_set(path2, images, 4, 4);
  CHECK(dpd::load_image_set(path2).modes.empty());
}

TEST_CASE("content hash is stable and sensitive") {
  std::string a = "hello";
  std::string b = "hellp";
  CHECK(dpd::content_hash(a.data(), a.size()) == dpd::content_hash(a.data(), a.size()));
  CHECK(dpd::content_hash(a.data(), a.size()) != dpd::content_hash(b.data(), b.size()));
}
