#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "predictchain/datastore.hpp"
#include "predictchain/decimal.hpp"
#include "predictchain/encoding.hpp"
#include "predictchain/error.hpp"
#include "predictchain/network.hpp"

namespace predictchain::models {

// Defaults are the evaluation settings for daily closing prices.
struct Hyperparams {
  int num_epochs = 70;
  std::string target_attrib = "close";
  int hidden_dim = 5;
  int num_hidden_layers = 1;
  int time_lag = 0;
  int training_lookback = 10;
  std::optional<int> sub_split_value;

  /// Integers in [1, 10'000] (time_lag may be 0). Throws Errc::invalid_argument.
  void validate() const;

  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct TrainOptions {
  double learning_rate = 0.01;
  double clip_norm = 5.0;
  /// Gradient-norm clipping for rnn/lstm/gru. Never applied to mlp.
  bool clip_recurrent = true;
  double train_fraction = datastore::kDefaultTrainFraction;
  std::uint64_t seed = 0;
  /// Column used for the sub-split; the Dow Jones data keys tickers by "stock".
  std::string sub_split_attrib = "stock";
};

// Per-feature min/max captured from the training rows.
struct Normalization {
  std::vector<double> minimum;
  std::vector<double> maximum;

  double normalize(std::size_t feature, double value) const;
  double denormalize(std::size_t feature, double value) const;
  double span(std::size_t feature) const;

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

inline constexpr std::size_t kNumArchetypes = 4;

/// mlp 1.0, rnn 1.2, gru 1.6, lstm 1.8.
Decimal archetype_multiplier(Archetype archetype) noexcept;

struct TrainedModel {
  std::string model_name;
  Archetype archetype = Archetype::mlp;
  Hyperparams hyperparams;
  std::size_t input_dim = 1;
  /// Input feature columns in window order; the target column is always last.
  std::vector<std::string> feature_columns;
  Normalization normalization;
  std::vector<double> weights;
  std::string trainer;
  std::string ds_name;
  double final_loss = 0.0;
  double accuracy = 0.0;

  Layout layout() const;
  std::size_t parameter_count() const { return layout().parameter_count(); }
  std::size_t target_feature() const { return input_dim - 1; }
};

/// Errc::diverged, carrying the last finite mean training loss (NaN if none).
class DivergedError : public Error {
 public:
  DivergedError(const std::string& message, double last_finite_loss)
      : Error(Errc::diverged, message), last_finite_loss_(last_finite_loss) {}
  double last_finite_loss() const noexcept { return last_finite_loss_; }

 private:
  double last_finite_loss_;
};

struct EvalReport {
  double loss = 0.0;      // MSE in normalized target space
  double accuracy = 0.0;  // clamp(1 - RMSE, 0, 1)
  std::vector<double> predictions;  // de-normalized
  std::vector<double> targets;      // de-normalized
};

struct TrainResult {
  TrainedModel model;
  EvalReport report;
  std::vector<double> epoch_losses;  // mean training loss per epoch
};

/// Untrained network. Throws Errc::invalid_argument on bad dimensions.
TrainedModel create_model(Archetype archetype, std::size_t input_dim, const Hyperparams& hp,
                          std::uint64_t seed);

/// parameter_count x archetype multiplier.
Decimal model_complexity(const TrainedModel& model);
Decimal model_complexity(Archetype archetype, std::size_t input_dim, const Hyperparams& hp);

/// Numeric columns other than the target, in frame order, then the target.
std::vector<std::string> default_feature_columns(const datastore::TableFrame& frame,
                                                 std::string_view target);
/// Same selection from a schema; columns named in `exclude` are skipped.
std::vector<std::string> feature_columns_from_schema(const std::vector<datastore::ColumnSpec>& schema,
                                                     std::string_view target,
                                                     const std::vector<std::string>& exclude = {});

/// Sub-split (when configured), train/validation split, min-max
/// normalization from training rows, then plain per-window SGD on the
/// squared error of the final output. Validation windows may reach back into
/// the tail of the training rows for their inputs; their targets never do.
TrainResult train(const TrainedModel& untrained, const datastore::TableFrame& frame,
                  const TrainOptions& options = {});

/// De-normalized single-step prediction for a raw (un-normalized) window of
/// training_lookback x input_dim values, row major.
double query(const TrainedModel& model, std::span<const double> raw_window);

/// De-normalized outputs of the last `steps` time steps. Recurrent archetypes
/// only; an mlp asked for more than one step throws Errc::single_step_only.
std::vector<double> query_steps(const TrainedModel& model, std::span<const double> raw_window,
                                std::size_t steps);

/// Windows from `frame` (raw values), ready for query(): row i of the result
/// holds the window whose prediction target is row i + lookback + time_lag.
struct WindowedRows {
  std::vector<double> windows;  // count x window_size, raw
  std::vector<double> targets;  // raw target values
  std::size_t count = 0;
  std::size_t window_size = 0;
  std::span<const double> window(std::size_t i) const {
    return std::span<const double>(windows).subspan(i * window_size, window_size);
  }
};
WindowedRows make_windows(const TrainedModel& model, const datastore::TableFrame& frame);

EvalReport evaluate(const TrainedModel& model, const datastore::TableFrame& validation);

struct RowPrediction {
  double prediction = 0.0;
  double actual = 0.0;
  double accuracy = 0.0;  // evaluate()'s rule applied to this single prediction
};
/// Predicts row `target_row` of `frame` from the training_lookback rows that
/// end time_lag rows before it. Throws Errc::out_of_range if no such window exists.
RowPrediction query_row(const TrainedModel& model, const datastore::TableFrame& frame,
                        std::size_t target_row);

/// clamp(1 - sqrt(mse), 0, 1).
double accuracy_from_mse(double normalized_mse);

/// Header (magic, version, archetype, dims, hyperparams, feature names,
/// normalization) followed by the weights as little-endian binary64.
Bytes serialize_model(const TrainedModel& model);
/// Throws Errc::corrupt_model for truncated or malformed blobs and
/// Errc::dimension_mismatch when the weight count disagrees with the header.
TrainedModel deserialize_model(std::span<const std::uint8_t> blob);

std::string save_model(const TrainedModel& model, datastore::Environment& env);
TrainedModel load_model(std::string_view link, const datastore::StorageHub& storage);

struct ModelMeta {
  std::string model_name;
  std::string model_link;
  Archetype archetype = Archetype::mlp;
  std::string ds_name;
  std::string trainer;
  Hyperparams hyperparams;
  std::size_t input_dim = 1;
  std::size_t parameter_count = 0;
  Decimal complexity;
  double loss = 0.0;
  double accuracy = 0.0;

  static ModelMeta describe(const TrainedModel& model, std::string model_link);
  nlohmann::json to_json() const;
  static ModelMeta from_json(const nlohmann::json& j);
};

// Name -> metadata map, optionally persisted as JSON lines (append on add).
class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(std::filesystem::path file);

  /// Throws Errc::duplicate.
  void add(const ModelMeta& meta);
  std::optional<ModelMeta> find(std::string_view model_name) const;
  bool contains(std::string_view model_name) const;
  std::vector<ModelMeta> list() const;

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> file_;
  std::map<std::string, ModelMeta, std::less<>> entries_;
};

}  // namespace predictchain::models
