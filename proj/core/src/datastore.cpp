#include "predictchain/datastore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "fsutil.hpp"
#include "predictchain/error.hpp"

namespace predictchain::datastore {

namespace fs = std::filesystem;

namespace {

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<std::vector<std::string>> split_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  auto end_record = [&] {
    fields.push_back(std::move(field));
    field.clear();
    // A bare empty line carries no record.
    if (!(fields.size() == 1 && fields[0].empty() && !field_was_quoted)) {
      records.push_back(std::move(fields));
    }
    fields.clear();
    field_was_quoted = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw Error(Errc::parse, "unexpected quote inside unquoted CSV field");
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        throw Error(Errc::parse, "bare carriage return in CSV");
      case '\n':
        end_record();
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) throw Error(Errc::parse, "unterminated quoted CSV field");
  if (!field.empty() || !fields.empty()) end_record();
  return records;
}

void check_link_prefix(std::string_view link, std::string_view scheme) {
  const std::string prefix = std::string(scheme) + "://";
  if (link.substr(0, prefix.size()) != prefix) {
    throw Error(Errc::invalid_argument,
                "link '" + std::string(link) + "' is not a " + std::string(scheme) + " link");
  }
}

bool is_hex_digest(std::string_view s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

}  // namespace

std::string_view to_string(ColumnKind kind) noexcept {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

TableFrame::TableFrame(std::vector<ColumnSpec> schema, std::vector<std::vector<std::string>> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != schema_.size()) {
      throw Error(Errc::parse, "row " + std::to_string(r + 1) + " has " +
                                   std::to_string(rows_[r].size()) + " fields, expected " +
                                   std::to_string(schema_.size()));
    }
  }
}

std::optional<std::size_t> TableFrame::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t TableFrame::require_column(std::string_view name) const {
  if (auto idx = column_index(name)) return *idx;
  throw Error(Errc::not_found, "unknown attribute '" + std::string(name) + "'");
}

double TableFrame::number(std::size_t row, std::size_t col) const {
  if (schema_[col].kind != ColumnKind::numeric) {
    throw Error(Errc::invalid_argument, "column '" + schema_[col].name + "' is not numeric");
  }
  const auto v = parse_number(rows_[row][col]);
  if (!v) throw Error(Errc::parse, "cell '" + rows_[row][col] + "' is not numeric");
  return *v;
}

std::vector<double> TableFrame::numeric_column(std::size_t col) const {
  std::vector<double> out;
  out.reserve(rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) out.push_back(number(r, col));
  return out;
}

TableFrame TableFrame::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, rows_.size());
  begin = std::min(begin, end);
  TableFrame out;
  out.schema_ = schema_;
  out.rows_.assign(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                   rows_.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

TableFrame parse_csv(std::string_view raw) {
  auto records = split_records(raw);
  if (records.empty()) throw Error(Errc::parse, "CSV has no header row");
  std::vector<std::string> header = std::move(records.front());
  records.erase(records.begin());
  std::set<std::string, std::less<>> names;
  for (const auto& h : header) {
    if (h.empty()) throw Error(Errc::parse, "CSV header has an empty column name");
    if (!names.insert(h).second) throw Error(Errc::parse, "duplicate CSV column '" + h + "'");
  }
  std::vector<ColumnSpec> schema;
  schema.reserve(header.size());
  for (auto& h : header) schema.push_back({std::move(h), ColumnKind::categorical});
  TableFrame probe(schema, records);  // validates shape

  for (std::size_t c = 0; c < schema.size(); ++c) {
    std::size_t numeric = 0;
    std::size_t blank = 0;
    for (const auto& row : records) {
      if (row[c].empty()) {
        ++blank;
      } else if (parse_number(row[c])) {
        ++numeric;
      }
    }
    const std::size_t non_blank = records.size() - blank;
    if (non_blank > 0 && numeric == non_blank) {
      if (blank > 0) {
        throw Error(Errc::parse, "numeric column '" + schema[c].name + "' has " +
                                     std::to_string(blank) + " missing cells");
      }
      schema[c].kind = ColumnKind::numeric;
    }
  }
  return TableFrame(std::move(schema), std::move(records));
}

TableFrame parse_csv(std::span<const std::uint8_t> raw) {
  return parse_csv(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
}

std::vector<std::string> distinct_values(const TableFrame& frame, std::string_view attrib) {
  const std::size_t col = frame.require_column(attrib);
  std::set<std::string> values;
  for (const auto& row : frame.rows()) values.insert(row[col]);
  return {values.begin(), values.end()};
}

TableFrame filter_by_value(const TableFrame& frame, std::string_view attrib,
                           std::string_view value) {
  const std::size_t col = frame.require_column(attrib);
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : frame.rows()) {
    if (row[col] == value) rows.push_back(row);
  }
  return TableFrame(frame.schema(), std::move(rows));
}

TableFrame split_by_attribute(const TableFrame& frame, std::string_view attrib,
                              std::size_t value_index) {
  const auto values = distinct_values(frame, attrib);
  if (value_index >= values.size()) {
    throw Error(Errc::out_of_range, "sub-split index " + std::to_string(value_index) +
                                        " out of range: '" + std::string(attrib) + "' has " +
                                        std::to_string(values.size()) + " distinct values");
  }
  return filter_by_value(frame, attrib, values[value_index]);
}

std::pair<TableFrame, TableFrame> train_validation_split(const TableFrame& frame,
                                                         double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(Errc::invalid_argument, "train fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = frame.row_count();
  if (n < 2) throw Error(Errc::insufficient_rows, "need at least 2 rows to split");
  const auto train = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  return {frame.slice(0, train), frame.slice(train, n)};
}

// ---------------------------------------------------------------------------

LocalEnvironment::LocalEnvironment(fs::path root) : root_(std::move(root)) {}

std::string LocalEnvironment::put(std::span<const std::uint8_t> bytes,
                                  std::string_view name_hint) {
  if (name_hint.empty() || name_hint.find("..") != std::string_view::npos ||
      name_hint.front() == '/') {
    throw Error(Errc::invalid_argument, "invalid local object name '" + std::string(name_hint) + "'");
  }
  detail::write_file_atomic(root_ / name_hint,
                            std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  return "local://" + std::string(name_hint);
}

Bytes LocalEnvironment::get(std::string_view link) const {
  check_link_prefix(link, "local");
  const fs::path p(std::string(link.substr(8)));
  const fs::path full = p.is_absolute() ? p : root_ / p;
  if (!fs::is_regular_file(full)) {
    throw Error(Errc::not_found, "no local object at '" + full.string() + "'");
  }
  return detail::read_file(full);
}

ContentAddressedEnvironment::ContentAddressedEnvironment(fs::path root) : root_(std::move(root)) {}

fs::path ContentAddressedEnvironment::object_path(std::string_view digest) const {
  return root_ / std::string(digest.substr(0, 2)) / std::string(digest.substr(2));
}

std::string ContentAddressedEnvironment::put(std::span<const std::uint8_t> bytes,
                                             std::string_view /*name_hint*/) {
  const std::string digest = sha256_hex(bytes);
  const fs::path path = object_path(digest);
  if (!fs::exists(path)) {
    detail::write_file_atomic(
        path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  return "cas://" + digest;
}

Bytes ContentAddressedEnvironment::get(std::string_view link) const {
  check_link_prefix(link, "cas");
  const std::string_view digest = link.substr(6);
  if (!is_hex_digest(digest)) {
    throw Error(Errc::invalid_argument, "malformed content address '" + std::string(link) + "'");
  }
  const fs::path path = object_path(digest);
  if (!fs::is_regular_file(path)) {
    throw Error(Errc::not_found, "no object stored under " + std::string(link));
  }
  Bytes bytes = detail::read_file(path);
  if (sha256_hex(bytes) != digest) {
    throw Error(Errc::integrity, "content hash mismatch for " + std::string(link));
  }
  return bytes;
}

StorageHub::StorageHub(const fs::path& root) : local_(root / "local"), cas_(root / "cas") {}

Environment& StorageHub::environment(std::string_view name) {
  if (name == "local") return local_;
  if (name == "cas" || name == "remote") return cas_;
  throw Error(Errc::invalid_argument, "unknown storage environment '" + std::string(name) + "'");
}

Bytes StorageHub::fetch(std::string_view link) const {
  const std::string scheme = link_scheme(link);
  if (scheme == "local") return local_.get(link);
  if (scheme == "cas") return cas_.get(link);
  throw Error(Errc::invalid_argument, "unsupported link scheme in '" + std::string(link) + "'");
}

std::string link_scheme(std::string_view link) {
  const auto pos = link.find("://");
  if (pos == std::string_view::npos || pos == 0) {
    throw Error(Errc::invalid_argument, "malformed link '" + std::string(link) + "'");
  }
  return std::string(link.substr(0, pos));
}

// ---------------------------------------------------------------------------

nlohmann::json DatasetMeta::to_json() const {
  nlohmann::json schema_json = nlohmann::json::array();
  for (const auto& c : schema) {
    schema_json.push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}});
  }
  nlohmann::json j = {{"ds_name", ds_name},     {"ds_link", ds_link},   {"ds_size", ds_size},
                      {"uploader", uploader},   {"schema", schema_json}, {"row_count", row_count}};
  if (time_attrib) j["time_attrib"] = *time_attrib;
  if (sub_split_attrib) j["sub_split_attrib"] = *sub_split_attrib;
  return j;
}

DatasetMeta DatasetMeta::from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.ds_name = j.at("ds_name").get<std::string>();
  m.ds_link = j.at("ds_link").get<std::string>();
  m.ds_size = j.at("ds_size").get<std::int64_t>();
  m.uploader = j.value("uploader", "");
  if (j.contains("time_attrib")) m.time_attrib = j["time_attrib"].get<std::string>();
  if (j.contains("sub_split_attrib")) m.sub_split_attrib = j["sub_split_attrib"].get<std::string>();
  for (const auto& c : j.at("schema")) {
    m.schema.push_back({c.at("name").get<std::string>(),
                        c.at("kind").get<std::string>() == "numeric" ? ColumnKind::numeric
                                                                     : ColumnKind::categorical});
  }
  m.row_count = j.at("row_count").get<std::int64_t>();
  return m;
}

DatasetRegistry::DatasetRegistry(fs::path file) : file_(std::move(file)) {
  for (const auto& line : detail::read_lines(*file_)) {
    if (line.empty()) continue;
    auto meta = DatasetMeta::from_json(nlohmann::json::parse(line));
    entries_.insert_or_assign(meta.ds_name, std::move(meta));
  }
}

void DatasetRegistry::add(const DatasetMeta& meta) {
  std::lock_guard lock(mutex_);
  if (entries_.contains(meta.ds_name)) {
    throw Error(Errc::duplicate, "dataset '" + meta.ds_name + "' already registered");
  }
  if (file_) detail::append_line(*file_, meta.to_json().dump());
  entries_.emplace(meta.ds_name, meta);
}

std::optional<DatasetMeta> DatasetRegistry::find(std::string_view ds_name) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(ds_name);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool DatasetRegistry::contains(std::string_view ds_name) const {
  std::lock_guard lock(mutex_);
  return entries_.find(ds_name) != entries_.end();
}

std::vector<DatasetMeta> DatasetRegistry::list() const {
  std::lock_guard lock(mutex_);
  std::vector<DatasetMeta> out;
  out.reserve(entries_.size());
  for (const auto& [_, m] : entries_) out.push_back(m);
  return out;
}

DatasetMeta DatasetStore::save_dataset(std::span<const std::uint8_t> raw, std::string_view ds_name,
                                       std::string_view environment, std::string_view uploader,
                                       std::optional<std::string> time_attrib,
                                       std::optional<std::string> sub_split_attrib) {
  if (ds_name.empty()) throw Error(Errc::invalid_argument, "dataset name must not be empty");
  std::lock_guard lock(save_mutex_);
  if (registry_.contains(ds_name)) {
    throw Error(Errc::duplicate, "dataset '" + std::string(ds_name) + "' already registered");
  }
  const TableFrame frame = parse_csv(raw);
  if (frame.row_count() == 0) {
    throw Error(Errc::insufficient_rows, "dataset '" + std::string(ds_name) + "' has no data rows");
  }
  if (time_attrib) frame.require_column(*time_attrib);
  if (sub_split_attrib) frame.require_column(*sub_split_attrib);

  DatasetMeta meta;
  meta.ds_name = std::string(ds_name);
  meta.ds_link = storage_.environment(environment).put(raw, "datasets/" + meta.ds_name + ".csv");
  meta.ds_size = static_cast<std::int64_t>(raw.size());
  meta.uploader = std::string(uploader);
  meta.time_attrib = std::move(time_attrib);
  meta.sub_split_attrib = std::move(sub_split_attrib);
  meta.schema = frame.schema();
  meta.row_count = static_cast<std::int64_t>(frame.row_count());
  registry_.add(meta);
  return meta;
}

TableFrame DatasetStore::load_dataset(std::string_view ds_link) const {
  return parse_csv(storage_.fetch(ds_link));
}

TableFrame DatasetStore::load_named(std::string_view ds_name) const {
  const auto meta = registry_.find(ds_name);
  if (!meta) throw Error(Errc::not_found, "unknown dataset '" + std::string(ds_name) + "'");
  return load_dataset(meta->ds_link);
}

}  // namespace predictchain::datastore
