#pragma once

#include <array>
#include <vector>

namespace mto {

struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};

// n-point Gauss-Legendre rule on [-1, 1].
GaussRule gauss_legendre(int n);

// Tensor-product Lagrange shape functions on the reference square [-1,1]^2.
// Q2 local node (i,j), i,j in {0,1,2}, has index 3*j + i; Q1 corner (i,j),
// i,j in {0,1}, has index 2*j + i.
struct ShapeQ2 {
  std::array<double, 9> N;
  std::array<double, 9> dxi;
  std::array<double, 9> deta;
};

struct ShapeQ1 {
  std::array<double, 4> N;
  std::array<double, 4> dxi;
  std::array<double, 4> deta;
};

ShapeQ2 shape_q2(double xi, double eta);
ShapeQ1 shape_q1(double xi, double eta);

// Q2 local indices of the corners, in Q1 local order.
inline constexpr std::array<int, 4> kQ2Corner = {0, 2, 6, 8};

// Q2 local indices along each side, ordered by increasing edge parameter.
// Side 0: eta=-1, 1: xi=+1, 2: eta=+1, 3: xi=-1.
inline constexpr std::array<std::array<int, 3>, 4> kSideQ2 = {
    {{0, 1, 2}, {2, 5, 8}, {6, 7, 8}, {0, 3, 6}}};

// Reference coordinates of a point on side s at edge parameter t in [-1,1].
std::array<double, 2> side_point(int side, double t);

}  // namespace mto
