#include "predictchain/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "fsutil.hpp"
#include "predictchain/error.hpp"

namespace predictchain::models {

namespace {

constexpr int kMaxHyper = 10'000;

void check_range(const char* name, int value, int lo) {
  if (value < lo || value > kMaxHyper) {
    throw Error(Errc::invalid_argument, std::string(name) + " must lie in [" + std::to_string(lo) +
                                            ", " + std::to_string(kMaxHyper) + "], got " +
                                            std::to_string(value));
  }
}

struct Prepared {
  std::vector<double> normalized;  // rows x features, row major
  std::size_t rows = 0;
  std::size_t features = 0;
};

std::vector<std::size_t> feature_indices(const TrainedModel& model,
                                         const datastore::TableFrame& frame) {
  std::vector<std::size_t> cols;
  cols.reserve(model.feature_columns.size());
  for (const auto& name : model.feature_columns) {
    const std::size_t c = frame.require_column(name);
    if (frame.schema()[c].kind != datastore::ColumnKind::numeric) {
      throw Error(Errc::invalid_argument, "feature column '" + name + "' is not numeric");
    }
    cols.push_back(c);
  }
  return cols;
}

Prepared normalize_frame(const TrainedModel& model, const datastore::TableFrame& frame) {
  const auto cols = feature_indices(model, frame);
  Prepared p;
  p.rows = frame.row_count();
  p.features = cols.size();
  p.normalized.resize(p.rows * p.features);
  for (std::size_t f = 0; f < p.features; ++f) {
    const auto values = frame.numeric_column(cols[f]);
    for (std::size_t r = 0; r < p.rows; ++r) {
      p.normalized[r * p.features + f] = model.normalization.normalize(f, values[r]);
    }
  }
  return p;
}

std::size_t window_count(const TrainedModel& m, std::size_t rows) {
  const auto need = static_cast<std::size_t>(m.hyperparams.training_lookback + m.hyperparams.time_lag);
  return rows > need ? rows - need : 0;
}

double clip_gradient(std::vector<double>& grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (std::isfinite(norm) && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

// --- blob encoding -----------------------------------------------------------

constexpr std::uint32_t kMagic = 0x444d4350;  // "PCMD" little-endian
constexpr std::uint32_t kVersion = 1;

class BlobWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class BlobReader {
 public:
  explicit BlobReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    const auto b = need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto b = need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto len = u32();
    const auto b = need(len);
    return std::string(b.begin(), b.end());
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> need(std::size_t n) {
    if (remaining() < n) throw Error(Errc::corrupt_model, "model blob is truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

void Hyperparams::validate() const {
  check_range("num_epochs", num_epochs, 1);
  check_range("hidden_dim", hidden_dim, 1);
  check_range("num_hidden_layers", num_hidden_layers, 1);
  check_range("time_lag", time_lag, 0);
  check_range("training_lookback", training_lookback, 1);
  if (sub_split_value) check_range("sub_split_value", *sub_split_value, 0);
  if (target_attrib.empty()) throw Error(Errc::invalid_argument, "target_attrib must be set");
}

nlohmann::json Hyperparams::to_json() const {
  nlohmann::json j = {{"num_epochs", num_epochs},
                      {"target_attrib", target_attrib},
                      {"hidden_dim", hidden_dim},
                      {"num_hidden_layers", num_hidden_layers},
                      {"time_lag", time_lag},
                      {"training_lookback", training_lookback}};
  if (sub_split_value) j["sub_split_value"] = *sub_split_value;
  return j;
}

Hyperparams Hyperparams::from_json(const nlohmann::json& j) {
  Hyperparams hp;
  hp.num_epochs = j.at("num_epochs").get<int>();
  hp.target_attrib = j.at("target_attrib").get<std::string>();
  hp.hidden_dim = j.at("hidden_dim").get<int>();
  hp.num_hidden_layers = j.at("num_hidden_layers").get<int>();
  hp.time_lag = j.at("time_lag").get<int>();
  hp.training_lookback = j.at("training_lookback").get<int>();
  if (j.contains("sub_split_value")) hp.sub_split_value = j["sub_split_value"].get<int>();
  return hp;
}

double Normalization::span(std::size_t f) const {
  const double s = maximum.at(f) - minimum.at(f);
  return s > 0.0 ? s : 1.0;
}

double Normalization::normalize(std::size_t f, double v) const { return (v - minimum.at(f)) / span(f); }

double Normalization::denormalize(std::size_t f, double v) const { return v * span(f) + minimum.at(f); }

Decimal archetype_multiplier(Archetype a) noexcept {
  switch (a) {
    case Archetype::mlp: return Decimal::from_raw(1'000'000'000);
    case Archetype::rnn: return Decimal::from_raw(1'200'000'000);
    case Archetype::gru: return Decimal::from_raw(1'600'000'000);
    case Archetype::lstm: return Decimal::from_raw(1'800'000'000);
  }
  return Decimal::from_int(1);
}

Layout TrainedModel::layout() const {
  return make_layout(archetype, input_dim, static_cast<std::size_t>(hyperparams.hidden_dim),
                     static_cast<std::size_t>(hyperparams.num_hidden_layers),
                     static_cast<std::size_t>(hyperparams.training_lookback));
}

TrainedModel create_model(Archetype archetype, std::size_t input_dim, const Hyperparams& hp,
                          std::uint64_t seed) {
  hp.validate();
  if (input_dim == 0) throw Error(Errc::invalid_argument, "input_dim must be positive");
  TrainedModel m;
  m.archetype = archetype;
  m.hyperparams = hp;
  m.input_dim = input_dim;
  m.weights = initial_weights(m.layout(), seed);
  return m;
}

Decimal model_complexity(Archetype archetype, std::size_t input_dim, const Hyperparams& hp) {
  const auto layout = make_layout(archetype, input_dim, static_cast<std::size_t>(hp.hidden_dim),
                                  static_cast<std::size_t>(hp.num_hidden_layers),
                                  static_cast<std::size_t>(hp.training_lookback));
  return Decimal::from_int(static_cast<std::int64_t>(layout.parameter_count())) *
         archetype_multiplier(archetype);
}

Decimal model_complexity(const TrainedModel& model) {
  return model_complexity(model.archetype, model.input_dim, model.hyperparams);
}

std::vector<std::string> default_feature_columns(const datastore::TableFrame& frame,
                                                 std::string_view target) {
  frame.require_column(target);
  return feature_columns_from_schema(frame.schema(), target);
}

std::vector<std::string> feature_columns_from_schema(const std::vector<datastore::ColumnSpec>& schema,
                                                     std::string_view target,
                                                     const std::vector<std::string>& exclude) {
  const auto t = std::find_if(schema.begin(), schema.end(),
                              [&](const datastore::ColumnSpec& c) { return c.name == target; });
  if (t == schema.end()) throw Error(Errc::not_found, "no column named '" + std::string(target) + "'");
  if (t->kind != datastore::ColumnKind::numeric) {
    throw Error(Errc::invalid_argument, "target attribute '" + std::string(target) + "' is not numeric");
  }
  std::vector<std::string> cols;
  for (const auto& spec : schema) {
    if (spec.name == target || spec.kind != datastore::ColumnKind::numeric) continue;
    if (std::find(exclude.begin(), exclude.end(), spec.name) != exclude.end()) continue;
    cols.push_back(spec.name);
  }
  cols.emplace_back(target);
  return cols;
}

double accuracy_from_mse(double mse) {
  if (!std::isfinite(mse)) return 0.0;
  return std::clamp(1.0 - std::sqrt(mse), 0.0, 1.0);
}

TrainResult train(const TrainedModel& untrained, const datastore::TableFrame& input_frame,
                  const TrainOptions& options) {
  TrainedModel model = untrained;
  const Hyperparams& hp = model.hyperparams;
  hp.validate();

  datastore::TableFrame frame = hp.sub_split_value
                                    ? datastore::split_by_attribute(
                                          input_frame, options.sub_split_attrib,
                                          static_cast<std::size_t>(*hp.sub_split_value))
                                    : input_frame;

  if (model.feature_columns.empty()) {
    model.feature_columns = default_feature_columns(frame, hp.target_attrib);
  } else if (model.feature_columns.back() != hp.target_attrib) {
    throw Error(Errc::invalid_argument, "the last feature column must be the target");
  }
  if (model.feature_columns.size() != model.input_dim) {
    throw Error(Errc::dimension_mismatch,
                "dataset yields " + std::to_string(model.feature_columns.size()) +
                    " input features, model expects " + std::to_string(model.input_dim));
  }

  const auto lookback = static_cast<std::size_t>(hp.training_lookback);
  const auto lag = static_cast<std::size_t>(hp.time_lag);
  const std::size_t need = lookback + lag + 1;
  const std::size_t n = frame.row_count();
  if (n < 2) {
    throw Error(Errc::insufficient_rows, "need at least " + std::to_string(need + 1) +
                                             " rows, dataset has " + std::to_string(n));
  }
  const auto [train_rows, validation_rows] = datastore::train_validation_split(frame, options.train_fraction);
  const std::size_t n_train = train_rows.row_count();
  if (n_train < need || validation_rows.row_count() == 0) {
    throw Error(Errc::insufficient_rows,
                "need at least one " + std::to_string(need) + "-row window in both the training (" +
                    std::to_string(n_train) + " rows) and validation (" +
                    std::to_string(validation_rows.row_count()) + " rows) splits");
  }

  // Normalization statistics come from the training rows only.
  const auto cols = feature_indices(model, frame);
  model.normalization.minimum.assign(cols.size(), 0.0);
  model.normalization.maximum.assign(cols.size(), 0.0);
  for (std::size_t f = 0; f < cols.size(); ++f) {
    const auto values = train_rows.numeric_column(cols[f]);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    model.normalization.minimum[f] = *lo;
    model.normalization.maximum[f] = *hi;
  }

  const Prepared data = normalize_frame(model, train_rows);
  const Layout layout = model.layout();
  const std::size_t d = data.features;
  const std::size_t count = window_count(model, n_train);
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;

  std::mt19937_64 shuffle_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<double> grad(model.weights.size());
  const bool clip = is_recurrent(model.archetype) && options.clip_recurrent;

  TrainResult result;
  double last_finite = std::numeric_limits<double>::quiet_NaN();
  for (int epoch = 0; epoch < hp.num_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (const std::size_t i : order) {
      const std::span<const double> window(&data.normalized[i * d], lookback * d);
      const double target = data.normalized[(i + lookback + lag) * d + (d - 1)];
      std::fill(grad.begin(), grad.end(), 0.0);
      total += loss_and_gradient(layout, model.weights, window, target, grad);
      if (clip) clip_gradient(grad, options.clip_norm);
      for (std::size_t k = 0; k < grad.size(); ++k) {
        model.weights[k] -= options.learning_rate * grad[k];
      }
    }
    const double mean = total / static_cast<double>(count);
    if (!std::isfinite(mean)) {
      throw DivergedError("training diverged at epoch " + std::to_string(epoch + 1) +
                              "; last finite loss " +
                              (std::isnan(last_finite) ? std::string("none") : std::to_string(last_finite)),
                          last_finite);
    }
    last_finite = mean;
    result.epoch_losses.push_back(mean);
  }

  const std::size_t context = lookback + lag;
  result.report = evaluate(model, frame.slice(n_train - context, n));
  if (!std::isfinite(result.report.loss)) {
    throw DivergedError("validation loss is not finite; last finite training loss " +
                            std::to_string(last_finite),
                        last_finite);
  }
  model.final_loss = result.report.loss;
  model.accuracy = result.report.accuracy;
  result.model = std::move(model);
  return result;
}

WindowedRows make_windows(const TrainedModel& model, const datastore::TableFrame& frame) {
  const auto cols = feature_indices(model, frame);
  const std::size_t d = cols.size();
  const auto lookback = static_cast<std::size_t>(model.hyperparams.training_lookback);
  const auto lag = static_cast<std::size_t>(model.hyperparams.time_lag);
  std::vector<std::vector<double>> columns;
  columns.reserve(d);
  for (const std::size_t c : cols) columns.push_back(frame.numeric_column(c));

  WindowedRows out;
  out.count = window_count(model, frame.row_count());
  out.window_size = lookback * d;
  out.windows.resize(out.count * out.window_size);
  out.targets.resize(out.count);
  for (std::size_t i = 0; i < out.count; ++i) {
    for (std::size_t t = 0; t < lookback; ++t) {
      for (std::size_t f = 0; f < d; ++f) {
        out.windows[i * out.window_size + t * d + f] = columns[f][i + t];
      }
    }
    out.targets[i] = columns[d - 1][i + lookback + lag];
  }
  return out;
}

namespace {

std::vector<double> normalized_window(const TrainedModel& model, std::span<const double> raw) {
  const Layout layout = model.layout();
  if (raw.size() != layout.window_size()) {
    throw Error(Errc::shape_mismatch, "query window has " + std::to_string(raw.size()) +
                                          " values, model expects " +
                                          std::to_string(layout.window_size()) + " (" +
                                          std::to_string(model.hyperparams.training_lookback) +
                                          " steps x " + std::to_string(model.input_dim) +
                                          " features)");
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = model.normalization.normalize(i % model.input_dim, raw[i]);
  }
  return out;
}

}  // namespace

double query(const TrainedModel& model, std::span<const double> raw_window) {
  const auto window = normalized_window(model, raw_window);
  const double y = forward(model.layout(), model.weights, window);
  return model.normalization.denormalize(model.target_feature(), y);
}

std::vector<double> query_steps(const TrainedModel& model, std::span<const double> raw_window,
                                std::size_t steps) {
  if (steps == 0) throw Error(Errc::invalid_argument, "steps must be positive");
  if (!is_recurrent(model.archetype) && steps > 1) {
    throw Error(Errc::single_step_only, "mlp models output a single time step per query");
  }
  const auto lookback = static_cast<std::size_t>(model.hyperparams.training_lookback);
  if (steps > lookback) {
    throw Error(Errc::invalid_argument, "at most " + std::to_string(lookback) +
                                            " steps are available from one window");
  }
  const auto window = normalized_window(model, raw_window);
  std::vector<double> per_step;
  forward(model.layout(), model.weights, window, &per_step);
  std::vector<double> out(per_step.end() - static_cast<std::ptrdiff_t>(steps), per_step.end());
  for (double& v : out) v = model.normalization.denormalize(model.target_feature(), v);
  return out;
}

RowPrediction query_row(const TrainedModel& model, const datastore::TableFrame& frame,
                        std::size_t target_row) {
  const auto lookback = static_cast<std::size_t>(model.hyperparams.training_lookback);
  const auto lag = static_cast<std::size_t>(model.hyperparams.time_lag);
  if (target_row >= frame.row_count() || target_row < lookback + lag) {
    throw Error(Errc::out_of_range, "row " + std::to_string(target_row) + " has no complete input window (rows " +
                                        std::to_string(lookback + lag) + ".." +
                                        std::to_string(frame.row_count()) + " do)");
  }
  const auto cols = feature_indices(model, frame);
  std::vector<double> window;
  window.reserve(lookback * cols.size());
  const std::size_t first = target_row - lag - lookback;
  for (std::size_t r = first; r < first + lookback; ++r) {
    for (const std::size_t c : cols) window.push_back(frame.number(r, c));
  }
  RowPrediction out;
  out.prediction = query(model, window);
  out.actual = frame.number(target_row, cols.back());
  const std::size_t t = model.target_feature();
  const double err = model.normalization.normalize(t, out.prediction) -
                     model.normalization.normalize(t, out.actual);
  out.accuracy = accuracy_from_mse(err * err);
  return out;
}

EvalReport evaluate(const TrainedModel& model, const datastore::TableFrame& validation) {
  const WindowedRows rows = make_windows(model, validation);
  if (rows.count == 0) {
    throw Error(Errc::insufficient_rows, "validation data yields no complete window");
  }
  const Layout layout = model.layout();
  const std::size_t target = model.target_feature();
  EvalReport report;
  double se = 0.0;
  for (std::size_t i = 0; i < rows.count; ++i) {
    const auto window = normalized_window(model, rows.window(i));
    const double y = forward(layout, model.weights, window);
    const double t = model.normalization.normalize(target, rows.targets[i]);
    se += (y - t) * (y - t);
    report.predictions.push_back(model.normalization.denormalize(target, y));
    report.targets.push_back(rows.targets[i]);
  }
  report.loss = se / static_cast<double>(rows.count);
  report.accuracy = accuracy_from_mse(report.loss);
  return report;
}

Bytes serialize_model(const TrainedModel& m) {
  BlobWriter w;
  w.u32(kMagic);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(m.archetype));
  w.u32(static_cast<std::uint32_t>(m.input_dim));
  const auto& hp = m.hyperparams;
  w.i32(hp.num_epochs);
  w.i32(hp.hidden_dim);
  w.i32(hp.num_hidden_layers);
  w.i32(hp.time_lag);
  w.i32(hp.training_lookback);
  w.u8(hp.sub_split_value ? 1 : 0);
  w.i32(hp.sub_split_value.value_or(0));
  w.str(hp.target_attrib);
  w.str(m.model_name);
  w.str(m.trainer);
  w.str(m.ds_name);
  w.u32(static_cast<std::uint32_t>(m.feature_columns.size()));
  for (const auto& f : m.feature_columns) w.str(f);
  w.u32(static_cast<std::uint32_t>(m.normalization.minimum.size()));
  for (std::size_t i = 0; i < m.normalization.minimum.size(); ++i) {
    w.f64(m.normalization.minimum[i]);
    w.f64(m.normalization.maximum[i]);
  }
  w.f64(m.final_loss);
  w.f64(m.accuracy);
  w.u64(m.weights.size());
  for (double v : m.weights) w.f64(v);
  return w.take();
}

TrainedModel deserialize_model(std::span<const std::uint8_t> blob) {
  BlobReader r(blob);
  if (r.u32() != kMagic) throw Error(Errc::corrupt_model, "not a model blob (bad magic)");
  if (r.u32() != kVersion) throw Error(Errc::corrupt_model, "unsupported model blob version");
  TrainedModel m;
  const auto arch = r.u8();
  if (arch > static_cast<std::uint8_t>(Archetype::gru)) {
    throw Error(Errc::corrupt_model, "unknown archetype tag " + std::to_string(arch));
  }
  m.archetype = static_cast<Archetype>(arch);
  m.input_dim = r.u32();
  auto& hp = m.hyperparams;
  hp.num_epochs = r.i32();
  hp.hidden_dim = r.i32();
  hp.num_hidden_layers = r.i32();
  hp.time_lag = r.i32();
  hp.training_lookback = r.i32();
  const bool has_split = r.u8() != 0;
  const int split = r.i32();
  if (has_split) hp.sub_split_value = split;
  hp.target_attrib = r.str();
  m.model_name = r.str();
  m.trainer = r.str();
  m.ds_name = r.str();
  try {
    hp.validate();
  } catch (const Error& e) {
    throw Error(Errc::corrupt_model, std::string("model blob hyperparameters invalid: ") + e.what());
  }
  const auto n_features = r.u32();
  if (n_features > r.remaining()) throw Error(Errc::corrupt_model, "model blob is truncated");
  for (std::uint32_t i = 0; i < n_features; ++i) m.feature_columns.push_back(r.str());
  const auto n_norm = r.u32();
  if (n_norm > r.remaining() / 16) throw Error(Errc::corrupt_model, "model blob is truncated");
  for (std::uint32_t i = 0; i < n_norm; ++i) {
    m.normalization.minimum.push_back(r.f64());
    m.normalization.maximum.push_back(r.f64());
  }
  m.final_loss = r.f64();
  m.accuracy = r.f64();
  const auto n_weights = r.u64();
  if (m.input_dim == 0 || n_features != m.input_dim || n_norm != m.input_dim) {
    throw Error(Errc::dimension_mismatch, "model blob feature count disagrees with input_dim");
  }
  const std::size_t expected = m.layout().parameter_count();
  if (n_weights != expected) {
    throw Error(Errc::dimension_mismatch,
                "model blob holds " + std::to_string(n_weights) + " weights but a " +
                    std::string(to_string(m.archetype)) + " with these dimensions needs " +
                    std::to_string(expected));
  }
  if (r.remaining() != n_weights * 8) {
    throw Error(Errc::corrupt_model, "model blob weight section has the wrong length");
  }
  m.weights.resize(n_weights);
  for (auto& v : m.weights) v = r.f64();
  return m;
}

std::string save_model(const TrainedModel& model, datastore::Environment& env) {
  const Bytes blob = serialize_model(model);
  return env.put(blob, "models/" + model.model_name + ".pcm");
}

TrainedModel load_model(std::string_view link, const datastore::StorageHub& storage) {
  return deserialize_model(storage.fetch(link));
}

ModelMeta ModelMeta::describe(const TrainedModel& model, std::string model_link) {
  ModelMeta m;
  m.model_name = model.model_name;
  m.model_link = std::move(model_link);
  m.archetype = model.archetype;
  m.ds_name = model.ds_name;
  m.trainer = model.trainer;
  m.hyperparams = model.hyperparams;
  m.input_dim = model.input_dim;
  m.parameter_count = model.parameter_count();
  m.complexity = model_complexity(model);
  m.loss = model.final_loss;
  m.accuracy = model.accuracy;
  return m;
}

nlohmann::json ModelMeta::to_json() const {
  return {{"model_name", model_name},
          {"model_link", model_link},
          {"archetype", std::string(to_string(archetype))},
          {"ds_name", ds_name},
          {"trainer", trainer},
          {"hyperparams", hyperparams.to_json()},
          {"input_dim", input_dim},
          {"parameter_count", parameter_count},
          {"complexity", complexity.to_string()},
          {"loss", loss},
          {"accuracy", accuracy}};
}

ModelMeta ModelMeta::from_json(const nlohmann::json& j) {
  ModelMeta m;
  m.model_name = j.at("model_name").get<std::string>();
  m.model_link = j.at("model_link").get<std::string>();
  m.archetype = parse_archetype(j.at("archetype").get<std::string>());
  m.ds_name = j.at("ds_name").get<std::string>();
  m.trainer = j.at("trainer").get<std::string>();
  m.hyperparams = Hyperparams::from_json(j.at("hyperparams"));
  m.input_dim = j.at("input_dim").get<std::size_t>();
  m.parameter_count = j.at("parameter_count").get<std::size_t>();
  m.complexity = Decimal::parse(j.at("complexity").get<std::string>());
  m.loss = j.at("loss").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  return m;
}

ModelRegistry::ModelRegistry(std::filesystem::path file) : file_(std::move(file)) {
  for (const auto& line : detail::read_lines(*file_)) {
    if (line.empty()) continue;
    auto meta = ModelMeta::from_json(nlohmann::json::parse(line));
    entries_.insert_or_assign(meta.model_name, std::move(meta));
  }
}

void ModelRegistry::add(const ModelMeta& meta) {
  std::lock_guard lock(mutex_);
  if (entries_.contains(meta.model_name)) {
    throw Error(Errc::duplicate, "model '" + meta.model_name + "' already registered");
  }
  if (file_) detail::append_line(*file_, meta.to_json().dump());
  entries_.emplace(meta.model_name, meta);
}

std::optional<ModelMeta> ModelRegistry::find(std::string_view model_name) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(model_name);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool ModelRegistry::contains(std::string_view model_name) const {
  std::lock_guard lock(mutex_);
  return entries_.find(model_name) != entries_.end();
}

std::vector<ModelMeta> ModelRegistry::list() const {
  std::lock_guard lock(mutex_);
  std::vector<ModelMeta> out;
  out.reserve(entries_.size());
  for (const auto& [_, m] : entries_) out.push_back(m);
  return out;
}

}  // namespace predictchain::models
