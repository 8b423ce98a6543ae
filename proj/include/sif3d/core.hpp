#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sif3d {

inline constexpr int kPoseEmbeddingDim = 32;
inline constexpr int kNumJoints = 23;
/// Per-frame input width of the motion pathway: translation, 6D rotation, pose embedding.
inline constexpr int kFrameFeatureDim = 3 + 6 + kPoseEmbeddingDim;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using PoseEmbedding = Eigen::Matrix<Scalar, kPoseEmbeddingDim, 1>;
/// 23 joints, one xyz row each, meters.
template <typename Scalar>
using JointSet = Eigen::Matrix<Scalar, kNumJoints, 3, Eigen::RowMajor>;
/// n x 3 point array, meters.
template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// One frame of motion: global translation, body orientation and pose embedding.
template <typename Scalar>
struct PoseState {
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();
  /// Unit quaternion, scalar part kept nonnegative.
  Eigen::Quaternion<Scalar> orientation = Eigen::Quaternion<Scalar>::Identity();
  PoseEmbedding<Scalar> pose_embedding = PoseEmbedding<Scalar>::Zero();

  bool operator==(const PoseState& other) const {
    return translation == other.translation &&
           orientation.coeffs() == other.orientation.coeffs() &&
           pose_embedding == other.pose_embedding;
  }
};

template <typename Scalar>
struct MotionSequence {
  std::vector<PoseState<Scalar>> frames;
  double frame_rate = 2.0;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  const PoseState<Scalar>& operator[](std::size_t i) const { return frames[i]; }
  bool operator==(const MotionSequence& other) const = default;
};

template <typename Scalar>
struct ScenePointCloud {
  PointMatrix<Scalar> points;

  ScenePointCloud() = default;
  explicit ScenePointCloud(PointMatrix<Scalar> pts) : points(std::move(pts)) { validate(); }

  Eigen::Index size() const { return points.rows(); }

  void validate() const {
    if (points.rows() < 1) throw std::invalid_argument("scene point cloud is empty");
    if (!points.allFinite()) throw std::invalid_argument("scene point cloud has non-finite coordinates");
  }
};

template <typename Scalar>
struct GazeSequence {
  PointMatrix<Scalar> points;

  Eigen::Index size() const { return points.rows(); }
};

struct HorizonConfig {
  int observed_frames = 6;
  int future_frames = 10;
  double frame_rate = 2.0;

  int total() const { return observed_frames + future_frames; }
  void validate() const {
    if (observed_frames < 1 || future_frames < 1)
      throw std::invalid_argument("horizon needs at least one observed and one future frame");
    if (!(frame_rate > 0.0)) throw std::invalid_argument("frame rate must be positive");
  }
  bool operator==(const HorizonConfig&) const = default;
};

using PoseStated = PoseState<double>;
using MotionSequenced = MotionSequence<double>;
using ScenePointCloudd = ScenePointCloud<double>;
using GazeSequenced = GazeSequence<double>;
using JointSetd = JointSet<double>;
using PointMatrixd = PointMatrix<double>;

// ---------------------------------------------------------------------------
// Sequences

/// Observed motion followed by `future_frames` copies of its last frame.
template <typename Scalar>
MotionSequence<Scalar> pad_virtual_sequence(const MotionSequence<Scalar>& observed, int future_frames) {
  if (observed.empty()) throw std::invalid_argument("pad_virtual_sequence: empty observed sequence");
  if (future_frames < 0) throw std::invalid_argument("pad_virtual_sequence: negative future frame count");
  MotionSequence<Scalar> padded = observed;
  padded.frames.reserve(observed.size() + static_cast<std::size_t>(future_frames));
  const PoseState<Scalar> last = observed.frames.back();
  for (int i = 0; i < future_frames; ++i) padded.frames.push_back(last);
  return padded;
}

// ---------------------------------------------------------------------------
// Rotations

inline constexpr double kUnitQuaternionTolerance = 1e-6;

template <typename Scalar>
void require_unit(const Eigen::Quaternion<Scalar>& q, const char* what) {
  if (!q.coeffs().allFinite() ||
      std::abs(q.norm() - Scalar(1)) > Scalar(kUnitQuaternionTolerance))
    throw std::invalid_argument(std::string(what) + ": quaternion is not unit length");
}

/// Normalized quaternion with nonnegative scalar part.
template <typename Scalar>
Eigen::Quaternion<Scalar> canonical_quaternion(const Eigen::Quaternion<Scalar>& q) {
  Eigen::Quaternion<Scalar> out = q.normalized();
  if (out.w() < Scalar(0)) out.coeffs() *= Scalar(-1);
  return out;
}

/// Angle of the relative rotation between two orientations, radians in [0, pi].
template <typename Scalar>
Scalar geodesic_angle(const Eigen::Quaternion<Scalar>& a, const Eigen::Quaternion<Scalar>& b) {
  const Eigen::Quaternion<Scalar> rel = a.normalized().conjugate() * b.normalized();
  using std::abs;
  using std::atan2;
  return Scalar(2) * atan2(rel.vec().norm(), abs(rel.w()));
}

/// First two columns of the rotation matrix, stacked.
template <typename Scalar>
Vector6<Scalar> rotation_encode(const Eigen::Quaternion<Scalar>& q) {
  require_unit(q, "rotation_encode");
  const Matrix3<Scalar> r = q.toRotationMatrix();
  Vector6<Scalar> out;
  out << r.col(0), r.col(1);
  return out;
}

/// Gram-Schmidt orthonormalization of a 6-vector into a rotation matrix.
/// Returns false when the halves are zero or parallel.
template <typename Scalar>
bool gram_schmidt_6d(const Vector6<Scalar>& v, Matrix3<Scalar>& rot, Scalar eps = Scalar(1e-9)) {
  const Vector3<Scalar> a1 = v.template head<3>();
  const Vector3<Scalar> a2 = v.template tail<3>();
  const Scalar n1 = a1.norm();
  if (!(n1 > eps)) return false;
  const Vector3<Scalar> b1 = a1 / n1;
  const Vector3<Scalar> u = a2 - b1.dot(a2) * b1;
  const Scalar n2 = u.norm();
  if (!(n2 > eps * std::max(Scalar(1), a2.norm()))) return false;
  const Vector3<Scalar> b2 = u / n2;
  rot.col(0) = b1;
  rot.col(1) = b2;
  rot.col(2) = b1.cross(b2);
  return true;
}

template <typename Scalar>
Eigen::Quaternion<Scalar> rotation_decode(const Vector6<Scalar>& v) {
  if (!v.allFinite()) throw std::invalid_argument("rotation_decode: non-finite input");
  Matrix3<Scalar> rot;
  if (!gram_schmidt_6d(v, rot)) throw std::invalid_argument("rotation_decode: degenerate 6D input");
  return canonical_quaternion(Eigen::Quaternion<Scalar>(rot));
}

}  // namespace sif3d
