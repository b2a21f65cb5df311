#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace predictchain::models {

enum class Archetype { mlp, rnn, lstm, gru };

std::string_view to_string(Archetype a) noexcept;
/// Throws Error(Errc::invalid_argument) for anything but mlp|rnn|lstm|gru.
Archetype parse_archetype(std::string_view name);

inline bool is_recurrent(Archetype a) noexcept { return a != Archetype::mlp; }

// Parameter layout of one archetype network. All weights live in one flat
// vector; blocks are laid out layer by layer, each layer as
// [input weights | recurrent weights | bias] (mlp: [weights | bias]),
// followed by the linear head [w | c].
struct Layout {
  Archetype archetype = Archetype::mlp;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 1;
  std::size_t num_layers = 1;
  std::size_t lookback = 1;

  std::size_t gates() const noexcept;
  std::size_t layer_input(std::size_t layer) const noexcept;
  std::size_t layer_offset(std::size_t layer) const noexcept;
  std::size_t layer_size(std::size_t layer) const noexcept;
  std::size_t head_offset() const noexcept;
  std::size_t parameter_count() const noexcept;
  std::size_t window_size() const noexcept { return lookback * input_dim; }
};

Layout make_layout(Archetype archetype, std::size_t input_dim, std::size_t hidden_dim,
                   std::size_t num_layers, std::size_t lookback);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per block. Recurrent blocks use
/// hidden_dim as fan_in for every matrix and bias of the cell.
std::vector<double> initial_weights(const Layout& layout, std::uint64_t seed);

/// Runs the network over one normalized window (lookback x input_dim, row
/// major). Returns the final output; when `step_outputs` is non-null it
/// receives the head output after every time step (mlp: one value).
double forward(const Layout& layout, std::span<const double> weights,
               std::span<const double> window, std::vector<double>* step_outputs = nullptr);

/// Squared error (y - target)^2 of the final output. Accumulates
/// d(loss)/d(weights) into `grad` (same size as weights) and returns the loss.
double loss_and_gradient(const Layout& layout, std::span<const double> weights,
                         std::span<const double> window, double target, std::span<double> grad);

}  // namespace predictchain::models
