#include "periogan/corpus/manifest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <regex>
#include <set>

#include "periogan/corpus/pixel.hpp"
#include "periogan/util/csvio.hpp"
#include "periogan/util/hash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace periogan::corpus {

std::string to_string(EyeSide v) { return v == EyeSide::left ? "left" : "right"; }

std::string to_string(Gender v) {
  switch (v) {
    case Gender::female: return "female";
    case Gender::male: return "male";
    default: return "unknown";
  }
}

std::string to_string(ClassLabel v) {
  switch (v) {
    case ClassLabel::bonafide: return "bonafide";
    case ClassLabel::attack: return "attack";
    default: return "synthetic";
  }
}

EyeSide eye_side_from_string(const std::string& s) {
  if (s == "left") return EyeSide::left;
  if (s == "right") return EyeSide::right;
  raise(ErrorKind::InvalidConfig, "unknown eye_side: " + s);
}

Gender gender_from_string(const std::string& s) {
  if (s == "female") return Gender::female;
  if (s == "male") return Gender::male;
  if (s == "unknown") return Gender::unknown;
  raise(ErrorKind::InvalidConfig, "unknown gender: " + s);
}

ClassLabel class_label_from_string(const std::string& s) {
  if (s == "bonafide") return ClassLabel::bonafide;
  if (s == "attack") return ClassLabel::attack;
  if (s == "synthetic") return ClassLabel::synthetic;
  raise(ErrorKind::InvalidConfig, "unknown class_label: " + s);
}

LabelingRules parse_labeling_rules(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(ErrorKind::InvalidConfig, std::string("labeling rules: ") + e.what());
  }
  LabelingRules out;
  for (const auto& r : j.value("rules", json::array())) {
    LabelingRule rule;
    rule.field = r.at("field").get<std::string>();
    rule.pattern = r.at("pattern").get<std::string>();
    rule.value = r.at("value").get<std::string>();
    require(rule.field == "eye_side" || rule.field == "gender" || rule.field == "class_label",
            ErrorKind::InvalidConfig, "labeling rule field: " + rule.field);
    // Validate eagerly so bad specs fail at load time, not mid-ingest.
    try {
      std::regex re(rule.pattern);
    } catch (const std::regex_error& e) {
      raise(ErrorKind::InvalidConfig,
            "labeling rule pattern '" + rule.pattern + "': " + e.what());
    }
    if (rule.field == "eye_side") eye_side_from_string(rule.value);
    if (rule.field == "gender") gender_from_string(rule.value);
    if (rule.field == "class_label") class_label_from_string(rule.value);
    out.rules.push_back(std::move(rule));
  }
  if (j.contains("defaults")) {
    const auto& d = j["defaults"];
    if (d.contains("eye_side"))
      out.default_eye_side = eye_side_from_string(d["eye_side"].get<std::string>());
    if (d.contains("gender"))
      out.default_gender = gender_from_string(d["gender"].get<std::string>());
    if (d.contains("class_label"))
      out.default_class_label = class_label_from_string(d["class_label"].get<std::string>());
  }
  return out;
}

LabelingRules load_labeling_rules(const std::string& path) {
  return parse_labeling_rules(read_text_file(path));
}

std::string manifest_checksum(const std::vector<ImageRecord>& records) {
  std::string blob;
  for (const auto& r : records) {
    blob += r.id;
    blob += '|';
    blob += r.path;
    blob += '|';
    blob += to_string(r.eye_side);
    blob += '|';
    blob += to_string(r.gender);
    blob += '|';
    blob += to_string(r.class_label);
    blob += '|';
    blob += std::to_string(r.width);
    blob += 'x';
    blob += std::to_string(r.height);
    blob += '\n';
  }
  return digest_string(blob);
}

namespace {

void apply_rules(const LabelingRules& labeling, const std::string& name, ImageRecord& rec) {
  rec.eye_side = labeling.default_eye_side;
  rec.gender = labeling.default_gender;
  rec.class_label = labeling.default_class_label;
  std::set<std::string> decided;
  for (const auto& rule : labeling.rules) {
    if (decided.count(rule.field)) continue;
    if (!std::regex_search(name, std::regex(rule.pattern))) continue;
    if (rule.field == "eye_side")
      rec.eye_side = eye_side_from_string(rule.value);
    else if (rule.field == "gender")
      rec.gender = gender_from_string(rule.value);
    else
      rec.class_label = class_label_from_string(rule.value);
    decided.insert(rule.field);
  }
}

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

IngestResult ingest_directory(const std::string& dir, const LabelingRules& labeling) {
  std::error_code ec;
  require(fs::is_directory(dir, ec), ErrorKind::IOFailure, "not a readable directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && has_image_extension(entry.path()))
      files.push_back(entry.path());
  }
  require(!ec, ErrorKind::IOFailure, "cannot scan directory: " + dir);
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::EmptyCorpus, "no images under " + dir);

  IngestResult out;
  std::map<std::pair<int, int>, int> resolution_votes;
  for (const auto& f : files) {
    ImageRecord rec;
    rec.path = f.string();
    rec.id = fs::relative(f, dir).generic_string();
    try {
      PixelTensor img = load_image(rec.path);
      rec.width = img.width;
      rec.height = img.height;
    } catch (const Error& e) {
      out.failures.push_back({rec.path, e.what()});
      continue;
    }
    apply_rules(labeling, f.filename().string(), rec);
    out.manifest.records.push_back(std::move(rec));
  }
  require(!out.manifest.records.empty(), ErrorKind::EmptyCorpus,
          "no decodable images under " + dir);
  for (const auto& r : out.manifest.records) ++resolution_votes[{r.width, r.height}];
  auto best = std::max_element(resolution_votes.begin(), resolution_votes.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
  out.manifest.source_width = best->first.first;
  out.manifest.source_height = best->first.second;
  out.manifest.checksum = manifest_checksum(out.manifest.records);
  return out;
}

void save_manifest(const std::string& path, const Manifest& m) {
  json j;
  j["schema_version"] = 1;
  j["source_resolution"] = {m.source_width, m.source_height};
  j["checksum"] = m.checksum;
  json recs = json::array();
  for (const auto& r : m.records) {
    recs.push_back({{"id", r.id},
                    {"path", r.path},
                    {"eye_side", to_string(r.eye_side)},
                    {"gender", to_string(r.gender)},
                    {"class_label", to_string(r.class_label)},
                    {"width", r.width},
                    {"height", r.height}});
  }
  j["records"] = std::move(recs);
  write_text_file(path, j.dump(2) + "\n");
}

Manifest load_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    raise(ErrorKind::IOFailure, "manifest " + path + ": " + e.what());
  }
  require(j.value("schema_version", 0) == 1, ErrorKind::InvalidConfig,
          "unsupported manifest schema in " + path);
  Manifest m;
  m.source_width = j.at("source_resolution").at(0).get<int>();
  m.source_height = j.at("source_resolution").at(1).get<int>();
  m.checksum = j.at("checksum").get<std::string>();
  std::set<std::string> ids;
  for (const auto& r : j.at("records")) {
    ImageRecord rec;
    rec.id = r.at("id").get<std::string>();
    rec.path = r.at("path").get<std::string>();
    rec.eye_side = eye_side_from_string(r.at("eye_side").get<std::string>());
    rec.gender = gender_from_string(r.at("gender").get<std::string>());
    rec.class_label = class_label_from_string(r.at("class_label").get<std::string>());
    rec.width = r.at("width").get<int>();
    rec.height = r.at("height").get<int>();
    require(ids.insert(rec.id).second, ErrorKind::InvalidConfig,
            "duplicate record id: " + rec.id);
    m.records.push_back(std::move(rec));
  }
  require(manifest_checksum(m.records) == m.checksum, ErrorKind::ChecksumError,
          "manifest checksum mismatch in " + path);
  return m;
}

}  // namespace periogan::corpus
