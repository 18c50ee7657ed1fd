#include "formcoach/motion/skeleton.hpp"

#include <algorithm>

#include "formcoach/common.hpp"

namespace formcoach::motion {

void Skeleton::validate() const {
  const std::size_t j = joint_names.size();
  if (j < 2) throw ValidationError("skeleton needs at least 2 joints");
  if (parent_index.size() != j) throw ValidationError("skeleton parent_index size mismatch");
  if (hip_index < 0 || static_cast<std::size_t>(hip_index) >= j) throw ValidationError("hip_index out of range");
  if (spine_index < 0 || static_cast<std::size_t>(spine_index) >= j) throw ValidationError("spine_index out of range");
  for (int p : parent_index)
    if (p < 0 || static_cast<std::size_t>(p) >= j) throw ValidationError("parent index out of range");
  if (parent_index[hip_index] != hip_index) throw ValidationError("hip joint must be its own parent");

  // Every joint must reach the hip without meeting a cycle or a second root.
  for (std::size_t i = 0; i < j; ++i) {
    int cur = static_cast<int>(i);
    std::size_t hops = 0;
    while (cur != hip_index) {
      int p = parent_index[cur];
      if (p == cur) throw ValidationError("skeleton has a second root at joint " + joint_names[cur]);
      cur = p;
      if (++hops > j) throw ValidationError("skeleton parent links contain a cycle");
    }
  }
}

std::vector<int> Skeleton::topo_order() const {
  std::vector<int> order;
  order.reserve(joint_count());
  std::vector<char> placed(joint_count(), 0);
  order.push_back(hip_index);
  placed[hip_index] = 1;
  // Repeated sweeps keep the order deterministic (increasing joint index
  // among ready joints); J is tiny so the quadratic cost is irrelevant.
  while (order.size() < joint_count()) {
    bool progressed = false;
    for (std::size_t i = 0; i < joint_count(); ++i) {
      if (placed[i]) continue;
      if (placed[parent_index[i]]) {
        order.push_back(static_cast<int>(i));
        placed[i] = 1;
        progressed = true;
      }
    }
    if (!progressed) throw ValidationError("skeleton is not a single tree");
  }
  return order;
}

std::optional<int> Skeleton::find(std::string_view name) const {
  for (std::size_t i = 0; i < joint_names.size(); ++i)
    if (joint_names[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

bool Skeleton::same_topology(const Skeleton& other) const {
  return joint_names == other.joint_names && parent_index == other.parent_index && hip_index == other.hip_index &&
         spine_index == other.spine_index;
}

SkeletonPtr make_skeleton(Skeleton s) {
  s.validate();
  return std::make_shared<const Skeleton>(std::move(s));
}

namespace {

struct JointSpec {
  const char* name;
  int parent;
};

// 17 joints: pelvis-rooted torso chain plus symmetric arms and legs.
constexpr JointSpec kDefaultJoints[] = {
    {"hip", 0},         // 0
    {"spine", 0},       // 1
    {"chest", 1},       // 2
    {"neck", 2},        // 3
    {"head", 3},        // 4
    {"l_shoulder", 2},  // 5
    {"l_elbow", 5},     // 6
    {"l_wrist", 6},     // 7
    {"r_shoulder", 2},  // 8
    {"r_elbow", 8},     // 9
    {"r_wrist", 9},     // 10
    {"l_hip", 0},       // 11
    {"l_knee", 11},     // 12
    {"l_ankle", 12},    // 13
    {"r_hip", 0},       // 14
    {"r_knee", 14},     // 15
    {"r_ankle", 15},    // 16
};

}  // namespace

SkeletonPtr default_skeleton() {
  static SkeletonPtr instance = [] {
    Skeleton s;
    for (const auto& js : kDefaultJoints) {
      s.joint_names.emplace_back(js.name);
      s.parent_index.push_back(js.parent);
    }
    s.hip_index = 0;
    s.spine_index = 1;
    return make_skeleton(std::move(s));
  }();
  return instance;
}

std::vector<double> default_bone_lengths() {
  // Meters, adult proportions at scale 1.
  std::vector<double> lengths(17, 0.0);
  lengths[1] = 0.25;   // hip -> spine
  lengths[2] = 0.25;   // spine -> chest
  lengths[3] = 0.20;   // chest -> neck
  lengths[4] = 0.15;   // neck -> head
  lengths[5] = 0.22;   // chest -> l_shoulder
  lengths[6] = 0.28;   // l_shoulder -> l_elbow
  lengths[7] = 0.25;   // l_elbow -> l_wrist
  lengths[8] = 0.22;   // chest -> r_shoulder
  lengths[9] = 0.28;   // r_shoulder -> r_elbow
  lengths[10] = 0.25;  // r_elbow -> r_wrist
  lengths[11] = 0.12;  // hip -> l_hip
  lengths[12] = 0.45;  // l_hip -> l_knee
  lengths[13] = 0.45;  // l_knee -> l_ankle
  lengths[14] = 0.12;  // hip -> r_hip
  lengths[15] = 0.45;  // r_hip -> r_knee
  lengths[16] = 0.45;  // r_knee -> r_ankle
  return lengths;
}

}  // namespace formcoach::motion
