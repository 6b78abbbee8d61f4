#pragma once

#include <array>
#include <span>

namespace liftkit::linalg {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;  // row-major

Mat3 identity3();
Mat3 transpose(const Mat3& m);
Mat3 multiply(const Mat3& a, const Mat3& b);
Vec3 multiply(const Mat3& m, const Vec3& v);
double determinant(const Mat3& m);
double frobenius_norm(const Mat3& m);

struct Svd3 {
  Mat3 u;
  Vec3 singular_values;  // descending, non-negative
  Mat3 v;
};

// m = u * diag(s) * v^T via one-sided Jacobi. Throws Error(numeric) if the
// sweep cap is reached without convergence.
Svd3 svd3(const Mat3& m);

// x -> scale * rotation * x + translation
struct SimilarityTransform {
  Mat3 rotation = identity3();
  double scale = 1.0;
  Vec3 translation{0.0, 0.0, 0.0};

  Vec3 apply(const Vec3& x) const;
};

// Closed-form least-squares similarity (Umeyama) taking `source` onto
// `target`, both J x 3 row-major with J >= 3. The rotation is forced proper.
// Throws Error(numeric) "degenerate point set" when the source has no spread.
SimilarityTransform umeyama_align(std::span<const double> source, std::span<const double> target, bool with_scale = true);

}  // namespace liftkit::linalg
