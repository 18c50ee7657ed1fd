#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace formcoach::motion {

// Kinematic tree. The root (hip) is its own parent; every other joint has a
// parent with a smaller depth.
struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<int> parent_index;  // root: parent_index[i] == i
  int hip_index = 0;
  int spine_index = 1;

  std::size_t joint_count() const { return joint_names.size(); }

  // Throws ValidationError unless parent links form a single tree rooted at
  // hip_index, J >= 2 and all indices are in range.
  void validate() const;

  // Joint indices ordered parents-before-children, starting at the root.
  std::vector<int> topo_order() const;

  std::optional<int> find(std::string_view name) const;

  bool same_topology(const Skeleton& other) const;
};

using SkeletonPtr = std::shared_ptr<const Skeleton>;

SkeletonPtr make_skeleton(Skeleton s);

// The default 17-joint skeleton used by the synthetic generator and shipped
// model configuration.
SkeletonPtr default_skeleton();

// Canonical bone lengths (meters) of the default skeleton at scale 1, keyed
// by child joint index; the root entry is 0.
std::vector<double> default_bone_lengths();

}  // namespace formcoach::motion
