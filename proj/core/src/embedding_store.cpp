#include "duckling/embedding_store.hpp"

#include <cmath>
#include <map>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "duckling/errors.hpp"
#include "text_io.hpp"

namespace duckling {

namespace {

constexpr const char* kFixedColumns[] = {"patient_id", "region", "lesion_id", "label"};
constexpr std::size_t kNumFixed = 4;

std::string at_row(std::size_t row) { return " at row " + std::to_string(row); }

// Checks everything about one record that does not need the rest of the cohort.
void check_record(const LesionRecord& rec, std::size_t row, std::size_t dimension,
                  bool signed_values) {
  if (rec.lesion_id.empty()) throw ValidationError("empty lesion_id" + at_row(row));
  if (rec.embedding.empty()) throw ValidationError("empty embedding" + at_row(row));
  if (rec.embedding.size() != dimension) {
    throw ValidationError("inconsistent dimension" + at_row(row) + ": expected " +
                          std::to_string(dimension) + " values, found " +
                          std::to_string(rec.embedding.size()));
  }
  if (rec.label && *rec.label != 0 && *rec.label != 1) {
    throw ValidationError("label must be 0 or 1" + at_row(row));
  }
  for (std::size_t j = 0; j < rec.embedding.size(); ++j) {
    double v = rec.embedding[j];
    if (!std::isfinite(v)) {
      throw ValidationError("non-finite feature f" + std::to_string(j) + at_row(row));
    }
    if (!signed_values && v < 0.0) {
      throw ValidationError("negative feature f" + std::to_string(j) + at_row(row) +
                            " (load with signed values to allow)");
    }
  }
}

class DuplicateCheck {
 public:
  void add(const std::string& id, std::size_t row) {
    if (!seen_.insert(id).second) {
      throw ValidationError("duplicate lesion_id '" + id + "'" + at_row(row));
    }
  }

 private:
  std::unordered_set<std::string> seen_;
};

std::vector<LesionRecord> parse_csv(const std::string& text, const LoadOptions& options) {
  auto lines = text::split_lines(text);
  if (lines.empty()) throw ValidationError("missing CSV header");
  auto header = text::split_csv(lines[0]);
  if (!header || header->size() < kNumFixed) throw ValidationError("malformed CSV header");
  for (std::size_t c = 0; c < kNumFixed; ++c) {
    if ((*header)[c] != kFixedColumns[c]) {
      throw ValidationError("CSV header column " + std::to_string(c + 1) + " must be '" +
                            kFixedColumns[c] + "'");
    }
  }
  const std::size_t dimension = header->size() - kNumFixed;
  for (std::size_t j = 0; j < dimension; ++j) {
    if ((*header)[kNumFixed + j] != "f" + std::to_string(j)) {
      throw ValidationError("CSV header feature column " + std::to_string(j) + " must be 'f" +
                            std::to_string(j) + "'");
    }
  }

  std::vector<LesionRecord> records;
  DuplicateCheck duplicates;
  std::size_t row = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    ++row;
    auto fields = text::split_csv(lines[l]);
    if (!fields) throw ValidationError("unterminated quote" + at_row(row));
    if (fields->size() <= kNumFixed) {
      throw ValidationError("malformed row" + at_row(row) + ": expected " +
                            std::to_string(header->size()) + " columns, found " +
                            std::to_string(fields->size()));
    }
    LesionRecord rec;
    rec.patient_id = (*fields)[0];
    rec.region = (*fields)[1];
    rec.lesion_id = (*fields)[2];
    const std::string& label = (*fields)[3];
    if (!label.empty()) {
      auto parsed = text::parse_int(label);
      if (!parsed || (*parsed != 0 && *parsed != 1)) {
        throw ValidationError("label must be empty, 0 or 1" + at_row(row));
      }
      rec.label = static_cast<int>(*parsed);
    }
    rec.embedding.reserve(fields->size() - kNumFixed);
    for (std::size_t c = kNumFixed; c < fields->size(); ++c) {
      auto value = text::parse_double((*fields)[c]);
      if (!value) {
        throw ValidationError("non-numeric feature f" + std::to_string(c - kNumFixed) +
                              at_row(row));
      }
      rec.embedding.push_back(*value);
    }
    check_record(rec, row, dimension, options.signed_values);
    duplicates.add(rec.lesion_id, row);
    records.push_back(std::move(rec));
  }
  return records;
}

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t row) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ValidationError(std::string("missing or non-string '") + key + "'" + at_row(row));
  }
  return it->get<std::string>();
}

std::vector<LesionRecord> parse_jsonl(const std::string& text, const LoadOptions& options) {
  std::vector<LesionRecord> records;
  DuplicateCheck duplicates;
  std::size_t dimension = 0;
  std::size_t row = 0;
  for (auto line : text::split_lines(text)) {
    if (line.empty()) continue;
    ++row;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("malformed JSON" + at_row(row) + ": " + e.what());
    }
    if (!obj.is_object()) throw ValidationError("expected a JSON object" + at_row(row));

    LesionRecord rec;
    rec.patient_id = required_string(obj, "patient_id", row);
    rec.region = required_string(obj, "region", row);
    rec.lesion_id = required_string(obj, "lesion_id", row);
    if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
      if (!it->is_number_integer() || (it->get<long long>() != 0 && it->get<long long>() != 1)) {
        throw ValidationError("label must be 0 or 1" + at_row(row));
      }
      rec.label = it->get<int>();
    }
    auto emb = obj.find("embedding");
    if (emb == obj.end() || !emb->is_array()) {
      throw ValidationError("missing 'embedding' array" + at_row(row));
    }
    rec.embedding.reserve(emb->size());
    for (std::size_t j = 0; j < emb->size(); ++j) {
      const auto& v = (*emb)[j];
      if (!v.is_number()) {
        throw ValidationError("non-numeric feature f" + std::to_string(j) + at_row(row));
      }
      rec.embedding.push_back(v.get<double>());
    }
    if (row == 1) dimension = rec.embedding.size();
    check_record(rec, row, dimension, options.signed_values);
    duplicates.add(rec.lesion_id, row);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

Cohort Cohort::make(std::vector<LesionRecord> records, bool signed_values) {
  Cohort cohort;
  cohort.signed_values_ = signed_values;
  if (!records.empty()) cohort.dimension_ = records.front().embedding.size();
  DuplicateCheck duplicates;
  for (std::size_t i = 0; i < records.size(); ++i) {
    check_record(records[i], i + 1, cohort.dimension_, signed_values);
    duplicates.add(records[i].lesion_id, i + 1);
  }
  cohort.records_ = std::move(records);
  return cohort;
}

FileFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return FileFormat::Jsonl;
  return FileFormat::Csv;
}

Cohort parse_cohort(const std::string& text, FileFormat format, const LoadOptions& options) {
  auto records = format == FileFormat::Csv ? parse_csv(text, options) : parse_jsonl(text, options);
  return Cohort::make(std::move(records), options.signed_values);
}

Cohort load_cohort(const std::filesystem::path& path, FileFormat format,
                   const LoadOptions& options) {
  return parse_cohort(text::read_file(path), format, options);
}

std::string serialize_cohort(const Cohort& cohort, FileFormat format) {
  std::string out;
  if (format == FileFormat::Csv) {
    out += "patient_id,region,lesion_id,label";
    for (std::size_t j = 0; j < cohort.dimension(); ++j) out += ",f" + std::to_string(j);
    out += '\n';
    for (const auto& rec : cohort.records()) {
      out += text::csv_field(rec.patient_id);
      out += ',';
      out += text::csv_field(rec.region);
      out += ',';
      out += text::csv_field(rec.lesion_id);
      out += ',';
      if (rec.label) out += std::to_string(*rec.label);
      for (double v : rec.embedding) {
        out += ',';
        out += text::format_double(v);
      }
      out += '\n';
    }
    return out;
  }
  for (const auto& rec : cohort.records()) {
    nlohmann::ordered_json obj;
    obj["patient_id"] = rec.patient_id;
    obj["region"] = rec.region;
    obj["lesion_id"] = rec.lesion_id;
    if (rec.label) obj["label"] = *rec.label;
    obj["embedding"] = rec.embedding;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& path, FileFormat format) {
  text::write_file(path, serialize_cohort(cohort, format));
}

std::vector<ContextSet> group_contexts(const Cohort& cohort) {
  std::vector<ContextSet> sets;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  const auto& records = cohort.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    auto [it, inserted] = index.try_emplace({rec.patient_id, rec.region}, sets.size());
    if (inserted) sets.push_back(ContextSet{rec.patient_id, rec.region, {}, {}});
    ContextSet& set = sets[it->second];
    set.lesions.push_back(rec);
    set.record_index.push_back(i);
  }
  return sets;
}

}  // namespace duckling
