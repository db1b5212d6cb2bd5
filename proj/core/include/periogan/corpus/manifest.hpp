#pragma once

#include <string>
#include <utility>
#include <vector>

#include "periogan/util/error.hpp"

namespace periogan::corpus {

enum class EyeSide { left, right };
enum class Gender { female, male, unknown };
enum class ClassLabel { bonafide, attack, synthetic };

std::string to_string(EyeSide v);
std::string to_string(Gender v);
std::string to_string(ClassLabel v);
EyeSide eye_side_from_string(const std::string& s);
Gender gender_from_string(const std::string& s);
ClassLabel class_label_from_string(const std::string& s);

struct ImageRecord {
  std::string id;
  std::string path;
  EyeSide eye_side = EyeSide::left;
  Gender gender = Gender::unknown;
  ClassLabel class_label = ClassLabel::bonafide;
  int width = 0;
  int height = 0;

  bool operator==(const ImageRecord&) const = default;
};

struct Manifest {
  std::vector<ImageRecord> records;
  int source_width = 0;
  int source_height = 0;
  std::string checksum;

  bool operator==(const Manifest&) const = default;
};

/// Filename-driven labeling: per field, first matching regex wins; fields
/// with no match fall back to the defaults.
struct LabelingRule {
  std::string field;    // "eye_side" | "gender" | "class_label"
  std::string pattern;  // ECMAScript regex applied to the filename
  std::string value;
};

struct LabelingRules {
  std::vector<LabelingRule> rules;
  EyeSide default_eye_side = EyeSide::left;
  Gender default_gender = Gender::unknown;
  ClassLabel default_class_label = ClassLabel::bonafide;
};

LabelingRules parse_labeling_rules(const std::string& json_text);
LabelingRules load_labeling_rules(const std::string& path);

struct IngestFailure {
  std::string path;
  std::string reason;
};

struct IngestResult {
  Manifest manifest;
  std::vector<IngestFailure> failures;
};

/// Digest of the record list; recomputable, stored in the manifest.
std::string manifest_checksum(const std::vector<ImageRecord>& records);

/// Scans dir (recursively) for decodable images, labels them via the rules.
/// Undecodable files are reported in failures, never silently dropped.
IngestResult ingest_directory(const std::string& dir, const LabelingRules& labeling);

void save_manifest(const std::string& path, const Manifest& m);
Manifest load_manifest(const std::string& path);

}  // namespace periogan::corpus
