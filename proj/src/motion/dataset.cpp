#include "formcoach/motion/dataset.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace formcoach::motion {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json skeleton_to_json(const Skeleton& s) {
  return json{{"joint_names", s.joint_names},
              {"parent_index", s.parent_index},
              {"hip_index", s.hip_index},
              {"spine_index", s.spine_index}};
}

SkeletonPtr skeleton_from_json(const json& js) {
  Skeleton s;
  s.joint_names = js.at("joint_names").get<std::vector<std::string>>();
  s.parent_index = js.at("parent_index").get<std::vector<int>>();
  s.hip_index = js.at("hip_index").get<int>();
  s.spine_index = js.at("spine_index").get<int>();
  return make_skeleton(std::move(s));
}

}  // namespace

void save_sequence_file(const fs::path& path, const SequenceRecord& record) {
  record.seq.validate();
  json js;
  js["schema_version"] = 1;
  js["skeleton"] = skeleton_to_json(*record.seq.skeleton);
  js["fps"] = record.seq.fps;
  js["subject"] = record.subject;
  js["exercise"] = record.exercise;
  js["instruction"] = record.instruction;
  js["frames"] = record.seq.frames.values();  // row-major N*J*3, round-trip precision
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << js.dump(1, '\t') << "\n";
}

SequenceRecord load_sequence_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open sequence file " + path.string());
  json js;
  try {
    in >> js;
  } catch (const json::exception& e) {
    throw ValidationError("malformed sequence file " + path.string() + ": " + e.what());
  }
  SequenceRecord rec;
  try {
    rec.id = path.stem().string();
    rec.subject = js.at("subject").get<std::string>();
    rec.exercise = js.at("exercise").get<std::string>();
    rec.instruction = js.at("instruction").get<std::string>();
    auto skeleton = skeleton_from_json(js.at("skeleton"));
    auto values = js.at("frames").get<std::vector<double>>();
    const std::size_t j = skeleton->joint_count();
    if (values.empty() || values.size() % (j * 3) != 0)
      throw ValidationError("frame count is not a multiple of J*3 in " + path.string());
    const std::size_t n = values.size() / (j * 3);
    rec.seq.skeleton = std::move(skeleton);
    rec.seq.frames = Tensor({n, j, 3}, std::move(values));
    rec.seq.fps = js.at("fps").get<double>();
    rec.seq.validate();
  } catch (const json::exception& e) {
    throw ValidationError("invalid sequence file " + path.string() + ": " + e.what());
  }
  return rec;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir)) throw ValidationError("dataset directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  Dataset ds;
  ds.items.reserve(files.size());
  for (const auto& f : files) ds.items.push_back(load_sequence_file(f));
  return ds;
}

std::vector<const SequenceRecord*> Dataset::by_subject(const std::string& subject) const {
  std::vector<const SequenceRecord*> out;
  for (const auto& r : items)
    if (r.subject == subject) out.push_back(&r);
  return out;
}

std::vector<const SequenceRecord*> Dataset::excluding_subject(const std::string& subject) const {
  std::vector<const SequenceRecord*> out;
  for (const auto& r : items)
    if (r.subject != subject) out.push_back(&r);
  return out;
}

}  // namespace formcoach::motion
