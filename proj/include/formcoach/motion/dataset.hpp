#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "formcoach/motion/sequence.hpp"

namespace formcoach::motion {

// One dataset entry: a motion sequence plus its annotations. The on-disk
// format is documented in docs/dataset_format.md.
struct SequenceRecord {
  std::string id;  // file stem
  std::string subject;
  std::string exercise;
  std::string instruction;
  MotionSequence seq;
};

struct Dataset {
  std::vector<SequenceRecord> items;

  std::vector<const SequenceRecord*> by_subject(const std::string& subject) const;
  std::vector<const SequenceRecord*> excluding_subject(const std::string& subject) const;
};

void save_sequence_file(const std::filesystem::path& path, const SequenceRecord& record);
SequenceRecord load_sequence_file(const std::filesystem::path& path);

// Loads every *.json below dir (recursively), sorted by path.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace formcoach::motion
