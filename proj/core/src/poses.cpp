#include <Eigen/Geometry>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lim/error.hpp"
#include "lim/io.hpp"

namespace lim {

Eigen::Matrix3d quaternion_to_rotation(double qx, double qy, double qz, double qw) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  const double n = q.norm();
  require(n > 0.0 && std::isfinite(n), "quaternion must be nonzero");
  q.normalize();
  return q.toRotationMatrix();
}

std::vector<Mat4> load_poses(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kIo, "cannot open " + path);
  std::vector<Mat4> poses;
  std::size_t expected = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || !std::isfinite(x)) {
        fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
      v.push_back(x);
    }
    if (v.size() != 16 && v.size() != 8) {
      fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) +
                                  ": expected 16 (matrix) or 8 (TUM) values, got " +
                                  std::to_string(v.size()));
    }
    if (expected == 0) expected = v.size();
    if (v.size() != expected) {
      fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) + ": mixed pose formats");
    }
    Mat4 pose = Mat4::Identity();
    if (v.size() == 16) {
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) pose(r, c) = v[static_cast<std::size_t>(4 * r + c)];
      }
    } else {
      pose.topLeftCorner<3, 3>() = quaternion_to_rotation(v[4], v[5], v[6], v[7]);
      pose.block<3, 1>(0, 3) = Vec3(v[1], v[2], v[3]);
    }
    try {
      validate_pose(pose);
    } catch (const Error& e) {
      fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    poses.push_back(pose);
  }
  return poses;
}

}  // namespace lim
