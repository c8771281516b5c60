#include "wpose/skeleton.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace wpose {

void Topology::validate() const {
  if (root_index < 0 || root_index >= kKeypointCount)
    throw std::invalid_argument("topology: root index out of range");
  std::array<std::vector<int>, kKeypointCount> adj;
  for (const auto& [a, b] : connections) {
    if (a < 0 || a >= kKeypointCount || b < 0 || b >= kKeypointCount)
      throw std::invalid_argument("topology: connection index out of range");
    if (a == b) throw std::invalid_argument("topology: self connection");
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  // 17 nodes, 16 edges: connectivity makes it a tree.
  std::array<bool, kKeypointCount> seen{};
  std::vector<int> stack{root_index};
  seen[root_index] = true;
  int visited = 0;
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    ++visited;
    for (int next : adj[node])
      if (!seen[next]) {
        seen[next] = true;
        stack.push_back(next);
      }
  }
  if (visited != kKeypointCount)
    throw std::invalid_argument("topology: connection graph is not connected");
}

std::vector<int> Topology::neighbors(int keypoint) const {
  std::vector<int> out;
  for (const auto& [a, b] : connections) {
    if (a == keypoint) out.push_back(b);
    if (b == keypoint) out.push_back(a);
  }
  return out;
}

const Topology& default_topology() {
  static const Topology topo = [] {
    Topology t;
    t.name = "walker17";
    t.names = {"pelvis",        "spine_mid",     "neck",
               "left_shoulder", "right_shoulder", "left_elbow",
               "right_elbow",   "left_wrist",     "right_wrist",
               "left_hip",      "right_hip",      "left_knee",
               "right_knee",    "left_heel",      "right_heel",
               "left_toe",      "right_toe"};
    t.connections = {{{kPelvis, kSpineMid},
                      {kSpineMid, kNeck},
                      {kNeck, kLeftShoulder},
                      {kNeck, kRightShoulder},
                      {kLeftShoulder, kLeftElbow},
                      {kRightShoulder, kRightElbow},
                      {kLeftElbow, kLeftWrist},
                      {kRightElbow, kRightWrist},
                      {kPelvis, kLeftHip},
                      {kPelvis, kRightHip},
                      {kLeftHip, kLeftKnee},
                      {kRightHip, kRightKnee},
                      {kLeftKnee, kLeftHeel},
                      {kRightKnee, kRightHeel},
                      {kLeftHeel, kLeftToe},
                      {kRightHeel, kRightToe}}};
    t.root_index = kPelvis;
    for (int k = 0; k <= kRightWrist; ++k)
      t.camera_assignment[k] = CameraId::posture;
    for (int k = kLeftHip; k < kKeypointCount; ++k)
      t.camera_assignment[k] = CameraId::gait;
    t.validate();
    return t;
  }();
  return topo;
}

Skeleton3D root_relative(const Skeleton3D& skel, const Topology& topo) {
  Skeleton3D out = skel;
  const Vec3 root = skel.coords[topo.root_index];
  for (Vec3& p : out.coords) p -= root;
  return out;
}

std::array<CameraCoord, kKeypointCount> split_concat_coords(
    const Skeleton2D& skel, const Topology& topo, double cam_height) {
  std::array<CameraCoord, kKeypointCount> out;
  for (int k = 0; k < kKeypointCount; ++k) {
    const CameraId cam = topo.camera_assignment[k];
    const Vec2& px = skel.coords[k];
    if (cam == CameraId::posture) {
      if (px.y() >= cam_height) {
        std::ostringstream msg;
        msg << "keypoint " << k << " assigned to posture camera but v="
            << px.y() << " lies in the gait band";
        throw WrongHalf(msg.str());
      }
      out[k] = {CameraId::posture, px};
    } else {
      if (px.y() < cam_height) {
        std::ostringstream msg;
        msg << "keypoint " << k << " assigned to gait camera but v=" << px.y()
            << " lies in the posture band";
        throw WrongHalf(msg.str());
      }
      out[k] = {CameraId::gait, {px.x(), px.y() - cam_height}};
    }
  }
  return out;
}

Vec2 to_concat_coords(const CameraCoord& c, double cam_height) {
  if (c.camera == CameraId::posture) return c.pixel;
  return {c.pixel.x(), c.pixel.y() + cam_height};
}

std::array<double, kConnectionCount> limb_lengths(const Skeleton3D& skel,
                                                  const Topology& topo) {
  std::array<double, kConnectionCount> out{};
  for (int c = 0; c < kConnectionCount; ++c) {
    const auto& [a, b] = topo.connections[c];
    out[c] = (skel.coords[a] - skel.coords[b]).norm();
  }
  return out;
}

namespace {

// 9 significant digits: parse -> print reproduces the text exactly.
void append_number(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  line += buf;
}

std::vector<double> parse_csv_line(const std::string& line, std::size_t expect,
                                   std::size_t lineno) {
  std::vector<double> out;
  out.reserve(expect);
  const char* p = line.c_str();
  char* end = nullptr;
  while (*p) {
    const double v = std::strtod(p, &end);
    if (end == p) {
      std::ostringstream msg;
      msg << "line " << lineno << ": malformed number near '" << p << "'";
      throw SequenceIoError(msg.str());
    }
    out.push_back(v);
    p = end;
    if (*p == ',') ++p;
  }
  if (out.size() != expect) {
    std::ostringstream msg;
    msg << "line " << lineno << ": expected " << expect << " values, got "
        << out.size();
    throw SequenceIoError(msg.str());
  }
  return out;
}

const char* kHeader3D = "# wpose-skel3d v1 topology=%s format=timestamp,17x(x,y,z)";
const char* kHeader2D = "# wpose-skel2d v1 topology=%s format=timestamp,17x(u,v,conf,depth)";

}  // namespace

void write_3d_header(std::ostream& out, const Topology& topo) {
  char header[128];
  std::snprintf(header, sizeof(header), kHeader3D, topo.name.c_str());
  out << header << "\n";
}

void write_3d_record(std::ostream& out, const Skeleton3D& s) {
  std::string line;
  append_number(line, s.timestamp);
  for (const Vec3& p : s.coords) {
    for (int i = 0; i < 3; ++i) {
      line += ',';
      append_number(line, p(i));
    }
  }
  out << line << "\n";
}

void write_sequence_3d(std::ostream& out, const std::vector<Skeleton3D>& seq,
                       const Topology& topo) {
  write_3d_header(out, topo);
  for (const Skeleton3D& s : seq) write_3d_record(out, s);
}

std::vector<Skeleton3D> read_sequence_3d(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# wpose-skel3d v1", 0) != 0)
    throw SequenceIoError("missing 3d sequence header");
  std::vector<Skeleton3D> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto vals = parse_csv_line(line, 1 + 3 * kKeypointCount, lineno);
    Skeleton3D s;
    s.timestamp = vals[0];
    for (int k = 0; k < kKeypointCount; ++k)
      s.coords[k] = {vals[1 + 3 * k], vals[2 + 3 * k], vals[3 + 3 * k]};
    out.push_back(s);
  }
  return out;
}

void write_sequence_2d(std::ostream& out, const std::vector<Skeleton2D>& seq,
                       const Topology& topo) {
  char header[128];
  std::snprintf(header, sizeof(header), kHeader2D, topo.name.c_str());
  out << header << "\n";
  std::string line;
  for (const Skeleton2D& s : seq) {
    line.clear();
    append_number(line, s.timestamp);
    for (int k = 0; k < kKeypointCount; ++k) {
      line += ',';
      append_number(line, s.coords[k].x());
      line += ',';
      append_number(line, s.coords[k].y());
      line += ',';
      append_number(line, s.confidence[k]);
      line += ',';
      append_number(line, s.depth_at_kp[k]);
    }
    out << line << "\n";
  }
}

void read_2d_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# wpose-skel2d v1", 0) != 0)
    throw SequenceIoError("missing 2d sequence header");
}

bool read_2d_record(std::istream& in, Skeleton2D& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto vals = parse_csv_line(line, 1 + 4 * kKeypointCount, 0);
    out.timestamp = vals[0];
    for (int k = 0; k < kKeypointCount; ++k) {
      out.coords[k] = {vals[1 + 4 * k], vals[2 + 4 * k]};
      out.confidence[k] = vals[3 + 4 * k];
      out.depth_at_kp[k] = vals[4 + 4 * k];
    }
    return true;
  }
  return false;
}

std::vector<Skeleton2D> read_sequence_2d(std::istream& in) {
  read_2d_header(in);
  std::vector<Skeleton2D> out;
  Skeleton2D s;
  while (read_2d_record(in, s)) out.push_back(s);
  return out;
}

void save_sequence_3d(const std::vector<Skeleton3D>& seq, const std::string& path,
                      const Topology& topo) {
  std::ofstream out(path);
  if (!out) throw SequenceIoError("cannot write " + path);
  write_sequence_3d(out, seq, topo);
}

std::vector<Skeleton3D> load_sequence_3d(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SequenceIoError("cannot open " + path);
  return read_sequence_3d(in);
}

void save_sequence_2d(const std::vector<Skeleton2D>& seq, const std::string& path,
                      const Topology& topo) {
  std::ofstream out(path);
  if (!out) throw SequenceIoError("cannot write " + path);
  write_sequence_2d(out, seq, topo);
}

std::vector<Skeleton2D> load_sequence_2d(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SequenceIoError("cannot open " + path);
  return read_sequence_2d(in);
}

}  // namespace wpose
