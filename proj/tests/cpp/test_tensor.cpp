#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "dpd/tensor.hpp"

using dpd::Tensor;

TEST_CASE("shape and data sizes must agree") {
  CHECK_NOTHROW(Tensor({2, 3}, std::vector<double>(6, 0.0)));
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0}, {}), std::invalid_argument);
}

TEST_CASE("non-finite entries are rejected at construction") {
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::quiet_NaN()}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::infinity()}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2}, {0.0, -std::numeric_limits<double>::infinity()}),
                  std::invalid_argument);
}

TEST_CASE("scalar representation") {
  Tensor s = Tensor::scalar(3.5);
  CHECK(s.is_scalar());
  CHECK(s.shape() == std::vector<std::size_t>{1});
  CHECK(s.item() == 3.5);
  Tensor m = Tensor::zeros({2, 2});
  CHECK_FALSE(m.is_scalar());
  CHECK_THROWS(m.item());
}

TEST_CASE("rank-2 accessors") {
  Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1 * 3 + 2) == 6.0);
  Tensor v = Tensor::from_vector({1, 2});
  CHECK_THROWS(v.rows());
}

TEST_CASE("structure helpers") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  Tensor c = Tensor::zeros({3, 2});
  CHECK(dpd::same_shape(a, b));
  CHECK_FALSE(dpd::same_shape(a, c));
  CHECK(dpd::shape_str({2, 3}) == "[2,3]");

  dpd::ParamTree p1{{"w", a}}, p2{{"w", b}}, p3{{"w", c}}, p4{{"x", b}};
  CHECK(dpd::same_structure(p1, p2));
  CHECK_FALSE(dpd::same_structure(p1, p3));
  CHECK_FALSE(dpd::same_structure(p1, p4));
}
