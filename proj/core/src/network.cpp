#include "predictchain/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "predictchain/error.hpp"

namespace predictchain::models {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += M x, M is rows x cols row-major.
void gemv_add(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = m + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y += M^T d
void gemv_t_add(const double* m, std::size_t rows, std::size_t cols, const double* d, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double dr = d[r];
    if (dr == 0.0) continue;
    const double* row = m + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * dr;
  }
}

// G += d x^T
void outer_add(double* g, std::size_t rows, std::size_t cols, const double* d, const double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double dr = d[r];
    if (dr == 0.0) continue;
    double* row = g + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += dr * x[c];
  }
}

// Views into one recurrent layer's block.
struct CellParams {
  const double* w_ih;
  const double* w_hh;
  const double* bias;
};

struct CellGrads {
  double* w_ih;
  double* w_hh;
  double* bias;
};

template <typename P>
P cell_view(const Layout& l, std::size_t layer, auto* base) {
  const std::size_t g = l.gates();
  const std::size_t h = l.hidden_dim;
  const std::size_t in = l.layer_input(layer);
  auto* p = base + l.layer_offset(layer);
  return P{p, p + g * h * in, p + g * h * in + g * h * h};
}

// Per-layer forward record for backprop. Vectors are indexed [t * width + i];
// hidden/cell state arrays hold T+1 entries with entry 0 the zero initial state.
struct LayerTrace {
  std::vector<double> inputs;  // T x in
  std::vector<double> hidden;  // (T+1) x H
  std::vector<double> cell;    // lstm: (T+1) x H
  std::vector<double> gates;   // T x (G*H) post-activation
  std::vector<double> extra;   // gru: T x H, U_n h_{t-1}; lstm: T x H, tanh(c_t)
};

void rnn_forward(const Layout& l, std::size_t layer, std::span<const double> w, LayerTrace& tr) {
  const std::size_t h = l.hidden_dim;
  const std::size_t in = l.layer_input(layer);
  const std::size_t steps = l.lookback;
  const auto p = cell_view<CellParams>(l, layer, w.data());
  tr.hidden.assign((steps + 1) * h, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    double* out = &tr.hidden[(t + 1) * h];
    for (std::size_t i = 0; i < h; ++i) out[i] = p.bias[i];
    gemv_add(p.w_ih, h, in, &tr.inputs[t * in], out);
    gemv_add(p.w_hh, h, h, &tr.hidden[t * h], out);
    for (std::size_t i = 0; i < h; ++i) out[i] = std::tanh(out[i]);
  }
}

void rnn_backward(const Layout& l, std::size_t layer, std::span<const double> w,
                  const LayerTrace& tr, std::vector<double>& d_hidden, std::span<double> grad,
                  std::vector<double>* d_inputs) {
  const std::size_t h = l.hidden_dim;
  const std::size_t in = l.layer_input(layer);
  const std::size_t steps = l.lookback;
  const auto p = cell_view<CellParams>(l, layer, w.data());
  const auto g = cell_view<CellGrads>(l, layer, grad.data());
  std::vector<double> dh_next(h, 0.0);
  std::vector<double> da(h);
  for (std::size_t t = steps; t-- > 0;) {
    const double* ht = &tr.hidden[(t + 1) * h];
    for (std::size_t i = 0; i < h; ++i) {
      const double dh = d_hidden[t * h + i] + dh_next[i];
      da[i] = dh * (1.0 - ht[i] * ht[i]);
    }
    outer_add(g.w_ih, h, in, da.data(), &tr.inputs[t * in]);
    outer_add(g.w_hh, h, h, da.data(), &tr.hidden[t * h]);
    for (std::size_t i = 0; i < h; ++i) g.bias[i] += da[i];
    if (d_inputs) gemv_t_add(p.w_ih, h, in, da.data(), &(*d_inputs)[t * in]);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    gemv_t_add(p.w_hh, h, h, da.data(), dh_next.data());
  }
}

// Gate order i, f, g, o.
void lstm_forward(const Layout& l, std::size_t layer, std::span<const double> w, LayerTrace& tr) {
  const std::size_t h = l.hidden_dim;
  const std::size_t in = l.layer_input(layer);
  const std::size_t steps = l.lookback;
  const auto p = cell_view<CellParams>(l, layer, w.data());
  tr.hidden.assign((steps + 1) * h, 0.0);
  tr.cell.assign((steps + 1) * h, 0.0);
  tr.gates.assign(steps * 4 * h, 0.0);
  tr.extra.assign(steps * h, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    double* a = &tr.gates[t * 4 * h];
    for (std::size_t i = 0; i < 4 * h; ++i) a[i] = p.bias[i];
    gemv_add(p.w_ih, 4 * h, in, &tr.inputs[t * in], a);
    gemv_add(p.w_hh, 4 * h, h, &tr.hidden[t * h], a);
    const double* c_prev = &tr.cell[t * h];
    double* c = &tr.cell[(t + 1) * h];
    double* hout = &tr.hidden[(t + 1) * h];
    double* tc = &tr.extra[t * h];
    for (std::size_t k = 0; k < h; ++k) {
      const double ig = sigmoid(a[k]);
      const double fg = sigmoid(a[h + k]);
      const double gg = std::tanh(a[2 * h + k]);
      const double og = sigmoid(a[3 * h + k]);
      a[k] = ig;
      a[h + k] = fg;
      a[2 * h + k] = gg;
      a[3 * h + k] = og;
      c[k] = fg * c_prev[k] + ig * gg;
      tc[k] = std::tanh(c[k]);
      hout[k] = og * tc[k];
    }
  }
}

void lstm_backward(const Layout& l, std::size_t layer, std::span<const double> w,
                   const LayerTrace& tr, std::vector<double>& d_hidden, std::span<double> grad,
                   std::vector<double>* d_inputs) {
  const std::size_t h = l.hidden_dim;
  const std::size_t in = l.layer_input(layer);
  const std::size_t steps = l.lookback;
  const auto p = cell_view<CellParams>(l, layer, w.data());
  const auto g = cell_view<CellGrads>(l, layer, grad.data());
  std::vector<double> dh_next(h, 0.0);
  std::vector<double> dc_next(h, 0.0);
  std::vector<double> da(4 * h);
  for (std::size_t t = steps; t-- > 0;) {
    const double* a = &tr.gates[t * 4 * h];
    const double* c_prev = &tr.cell[t * h];
    const double* tc = &tr.extra[t * h];
    for (std::size_t k = 0; k < h; ++k) {
      const double ig = a[k];
      const double fg = a[h + k];
      const double gg = a[2 * h + k];
      const double og = a[3 * h + k];
      const double dh = d_hidden[t * h + k] + dh_next[k];
      const double dc = dc_next[k] + dh * og * (1.0 - tc[k] * tc[k]);
      da[k] = dc * gg * ig * (1.0 - ig);
      da[h + k] = dc * c_prev[k] * fg * (1.0 - fg);
      da[2 * h + k] = dc * ig * (1.0 - gg * gg);
      da[3 * h + k] = dh * tc[k] * og * (1.0 - og);
      dc_next[k] = dc * fg;
    }
    outer_add(g.w_ih, 4 * h, in, da.data(), &tr.inputs[t * in]);
    outer_add(g.w_hh, 4 * h, h, da.data(), &tr.hidden[t * h]);
    for (std::size_t i = 0; i < 4 * h; ++i) g.bias[i] += da[i];
    if (d_inputs) gemv_t_add(p.w_ih, 4 * h, in, da.data(), &(*d_inputs)[t * in]);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    gemv_t_add(p.w_hh, 4 * h, h, da.data(), dh_next.data());
  }
}

// Gate order r, z, n. n = tanh(W_n x + b_n + r * (U_n h)), h' = (1 - z) n + z h.
void gru_forward(const Layout& l, std::size_t layer, std::span<const double> w, LayerTrace& tr) {
  const std::size_t h = l.hidden_dim;
  const std::size_t in = l.layer_input(layer);
  const std::size_t steps = l.lookback;
  const auto p = cell_view<CellParams>(l, layer, w.data());
  tr.hidden.assign((steps + 1) * h, 0.0);
  tr.gates.assign(steps * 3 * h, 0.0);
  tr.extra.assign(steps * h, 0.0);
  std::vector<double> xa(3 * h);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* h_prev = &tr.hidden[t * h];
    double* a = &tr.gates[t * 3 * h];
    double* un = &tr.extra[t * h];
    for (std::size_t i = 0; i < 3 * h; ++i) xa[i] = p.bias[i];
    gemv_add(p.w_ih, 3 * h, in, &tr.inputs[t * in], xa.data());
    // r and z take the full recurrent contribution; the candidate keeps U_n h separate.
    for (std::size_t i = 0; i < 2 * h; ++i) a[i] = xa[i];
    gemv_add(p.w_hh, 2 * h, h, h_prev, a);
    std::fill(un, un + h, 0.0);
    gemv_add(p.w_hh + 2 * h * h, h, h, h_prev, un);
    double* hout = &tr.hidden[(t + 1) * h];
    for (std::size_t k = 0; k < h; ++k) {
      const double r = sigmoid(a[k]);
      const double z = sigmoid(a[h + k]);
      const double n = std::tanh(xa[2 * h + k] + r * un[k]);
      a[k] = r;
      a[h + k] = z;
      a[2 * h + k] = n;
      hout[k] = (1.0 - z) * n + z * h_prev[k];
    }
  }
}

void gru_backward(const Layout& l, std::size_t layer, std::span<const double> w,
                  const LayerTrace& tr, std::vector<double>& d_hidden, std::span<double> grad,
                  std::vector<double>* d_inputs) {
  const std::size_t h = l.hidden_dim;
  const std::size_t in = l.layer_input(layer);
  const std::size_t steps = l.lookback;
  const auto p = cell_view<CellParams>(l, layer, w.data());
  const auto g = cell_view<CellGrads>(l, layer, grad.data());
  std::vector<double> dh_next(h, 0.0);
  std::vector<double> da(3 * h);  // d pre-activation for r, z, and the x-side of n
  std::vector<double> du(h);      // d (U_n h_prev)
  for (std::size_t t = steps; t-- > 0;) {
    const double* a = &tr.gates[t * 3 * h];
    const double* un = &tr.extra[t * h];
    const double* h_prev = &tr.hidden[t * h];
    std::vector<double> dh_prev(h, 0.0);
    for (std::size_t k = 0; k < h; ++k) {
      const double r = a[k];
      const double z = a[h + k];
      const double n = a[2 * h + k];
      const double dh = d_hidden[t * h + k] + dh_next[k];
      const double dn = dh * (1.0 - z);
      const double dz = dh * (h_prev[k] - n);
      dh_prev[k] = dh * z;
      const double dan = dn * (1.0 - n * n);
      const double dr = dan * un[k];
      du[k] = dan * r;
      da[k] = dr * r * (1.0 - r);
      da[h + k] = dz * z * (1.0 - z);
      da[2 * h + k] = dan;
    }
    outer_add(g.w_ih, 3 * h, in, da.data(), &tr.inputs[t * in]);
    for (std::size_t i = 0; i < 3 * h; ++i) g.bias[i] += da[i];
    outer_add(g.w_hh, 2 * h, h, da.data(), h_prev);
    outer_add(g.w_hh + 2 * h * h, h, h, du.data(), h_prev);
    if (d_inputs) gemv_t_add(p.w_ih, 3 * h, in, da.data(), &(*d_inputs)[t * in]);
    gemv_t_add(p.w_hh, 2 * h, h, da.data(), dh_prev.data());
    gemv_t_add(p.w_hh + 2 * h * h, h, h, du.data(), dh_prev.data());
    dh_next = std::move(dh_prev);
  }
}

struct MlpTrace {
  std::vector<std::vector<double>> activations;  // activations[0] = input, then one per layer
};

void mlp_forward(const Layout& l, std::span<const double> w, std::span<const double> window,
                 MlpTrace& tr) {
  const std::size_t h = l.hidden_dim;
  tr.activations.assign(l.num_layers + 1, {});
  tr.activations[0].assign(window.begin(), window.end());
  for (std::size_t layer = 0; layer < l.num_layers; ++layer) {
    const std::size_t in = l.layer_input(layer);
    const double* wm = w.data() + l.layer_offset(layer);
    const double* b = wm + h * in;
    auto& out = tr.activations[layer + 1];
    out.assign(b, b + h);
    gemv_add(wm, h, in, tr.activations[layer].data(), out.data());
    for (auto& v : out) v = std::tanh(v);
  }
}

double head(const Layout& l, std::span<const double> w, const double* hidden) {
  const double* hw = w.data() + l.head_offset();
  double y = hw[l.hidden_dim];
  for (std::size_t k = 0; k < l.hidden_dim; ++k) y += hw[k] * hidden[k];
  return y;
}

void recurrent_forward(const Layout& l, std::size_t layer, std::span<const double> w,
                       LayerTrace& tr) {
  switch (l.archetype) {
    case Archetype::rnn: rnn_forward(l, layer, w, tr); break;
    case Archetype::lstm: lstm_forward(l, layer, w, tr); break;
    case Archetype::gru: gru_forward(l, layer, w, tr); break;
    case Archetype::mlp: break;
  }
}

std::vector<LayerTrace> recurrent_stack(const Layout& l, std::span<const double> w,
                                        std::span<const double> window) {
  std::vector<LayerTrace> traces(l.num_layers);
  traces[0].inputs.assign(window.begin(), window.end());
  for (std::size_t layer = 0; layer < l.num_layers; ++layer) {
    if (layer > 0) {
      const auto& below = traces[layer - 1].hidden;
      traces[layer].inputs.assign(below.begin() + static_cast<std::ptrdiff_t>(l.hidden_dim),
                                  below.end());
    }
    recurrent_forward(l, layer, w, traces[layer]);
  }
  return traces;
}

void check_shapes(const Layout& l, std::span<const double> w, std::span<const double> window) {
  if (w.size() != l.parameter_count()) {
    throw Error(Errc::dimension_mismatch, "weight vector has " + std::to_string(w.size()) +
                                              " entries, layout expects " +
                                              std::to_string(l.parameter_count()));
  }
  if (window.size() != l.window_size()) {
    throw Error(Errc::shape_mismatch, "input window has " + std::to_string(window.size()) +
                                          " values, expected " + std::to_string(l.window_size()));
  }
}

}  // namespace

std::string_view to_string(Archetype a) noexcept {
  switch (a) {
    case Archetype::mlp: return "mlp";
    case Archetype::rnn: return "rnn";
    case Archetype::lstm: return "lstm";
    case Archetype::gru: return "gru";
  }
  return "?";
}

Archetype parse_archetype(std::string_view name) {
  if (name == "mlp") return Archetype::mlp;
  if (name == "rnn") return Archetype::rnn;
  if (name == "lstm") return Archetype::lstm;
  if (name == "gru") return Archetype::gru;
  throw Error(Errc::invalid_argument, "unknown model archetype '" + std::string(name) + "'");
}

std::size_t Layout::gates() const noexcept {
  switch (archetype) {
    case Archetype::lstm: return 4;
    case Archetype::gru: return 3;
    default: return 1;
  }
}

std::size_t Layout::layer_input(std::size_t layer) const noexcept {
  if (layer > 0) return hidden_dim;
  return archetype == Archetype::mlp ? lookback * input_dim : input_dim;
}

std::size_t Layout::layer_size(std::size_t layer) const noexcept {
  const std::size_t in = layer_input(layer);
  if (archetype == Archetype::mlp) return hidden_dim * in + hidden_dim;
  const std::size_t g = gates();
  return g * hidden_dim * (in + hidden_dim + 1);
}

std::size_t Layout::layer_offset(std::size_t layer) const noexcept {
  std::size_t off = 0;
  for (std::size_t i = 0; i < layer; ++i) off += layer_size(i);
  return off;
}

std::size_t Layout::head_offset() const noexcept { return layer_offset(num_layers); }

std::size_t Layout::parameter_count() const noexcept { return head_offset() + hidden_dim + 1; }

Layout make_layout(Archetype archetype, std::size_t input_dim, std::size_t hidden_dim,
                   std::size_t num_layers, std::size_t lookback) {
  if (input_dim == 0 || hidden_dim == 0 || num_layers == 0 || lookback == 0) {
    throw Error(Errc::invalid_argument, "network dimensions must be positive");
  }
  return Layout{archetype, input_dim, hidden_dim, num_layers, lookback};
}

std::vector<double> initial_weights(const Layout& l, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> w(l.parameter_count());
  auto fill = [&](std::size_t from, std::size_t to, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = from; i < to; ++i) w[i] = dist(rng);
  };
  for (std::size_t layer = 0; layer < l.num_layers; ++layer) {
    const std::size_t off = l.layer_offset(layer);
    const std::size_t fan_in =
        l.archetype == Archetype::mlp ? l.layer_input(layer) : l.hidden_dim;
    fill(off, off + l.layer_size(layer), fan_in);
  }
  fill(l.head_offset(), w.size(), l.hidden_dim);
  return w;
}

double forward(const Layout& l, std::span<const double> w, std::span<const double> window,
               std::vector<double>* step_outputs) {
  check_shapes(l, w, window);
  const std::size_t h = l.hidden_dim;
  if (l.archetype == Archetype::mlp) {
    MlpTrace tr;
    mlp_forward(l, w, window, tr);
    const double y = head(l, w, tr.activations.back().data());
    if (step_outputs) step_outputs->assign(1, y);
    return y;
  }
  const auto traces = recurrent_stack(l, w, window);
  const auto& top = traces.back().hidden;
  if (step_outputs) {
    step_outputs->resize(l.lookback);
    for (std::size_t t = 0; t < l.lookback; ++t) {
      (*step_outputs)[t] = head(l, w, &top[(t + 1) * h]);
    }
  }
  return head(l, w, &top[l.lookback * h]);
}

double loss_and_gradient(const Layout& l, std::span<const double> w,
                         std::span<const double> window, double target, std::span<double> grad) {
  check_shapes(l, w, window);
  if (grad.size() != w.size()) {
    throw Error(Errc::dimension_mismatch, "gradient buffer size differs from weights");
  }
  const std::size_t h = l.hidden_dim;
  double* g_head = grad.data() + l.head_offset();
  const double* w_head = w.data() + l.head_offset();

  if (l.archetype == Archetype::mlp) {
    MlpTrace tr;
    mlp_forward(l, w, window, tr);
    const auto& top = tr.activations.back();
    const double y = head(l, w, top.data());
    const double err = y - target;
    const double dy = 2.0 * err;
    for (std::size_t k = 0; k < h; ++k) g_head[k] += dy * top[k];
    g_head[h] += dy;
    std::vector<double> d_out(h);
    for (std::size_t k = 0; k < h; ++k) d_out[k] = dy * w_head[k];
    for (std::size_t layer = l.num_layers; layer-- > 0;) {
      const std::size_t in = l.layer_input(layer);
      const auto& out = tr.activations[layer + 1];
      std::vector<double> da(h);
      for (std::size_t k = 0; k < h; ++k) da[k] = d_out[k] * (1.0 - out[k] * out[k]);
      double* gw = grad.data() + l.layer_offset(layer);
      outer_add(gw, h, in, da.data(), tr.activations[layer].data());
      for (std::size_t k = 0; k < h; ++k) gw[h * in + k] += da[k];
      if (layer > 0) {
        d_out.assign(in, 0.0);
        gemv_t_add(w.data() + l.layer_offset(layer), h, in, da.data(), d_out.data());
      }
    }
    return err * err;
  }

  auto traces = recurrent_stack(l, w, window);
  const auto& top = traces.back().hidden;
  const double* h_last = &top[l.lookback * h];
  const double y = head(l, w, h_last);
  const double err = y - target;
  const double dy = 2.0 * err;
  for (std::size_t k = 0; k < h; ++k) g_head[k] += dy * h_last[k];
  g_head[h] += dy;

  std::vector<double> d_hidden(l.lookback * h, 0.0);
  for (std::size_t k = 0; k < h; ++k) d_hidden[(l.lookback - 1) * h + k] = dy * w_head[k];

  for (std::size_t layer = l.num_layers; layer-- > 0;) {
    std::vector<double> d_inputs;
    std::vector<double>* d_in_ptr = nullptr;
    if (layer > 0) {
      d_inputs.assign(l.lookback * l.layer_input(layer), 0.0);
      d_in_ptr = &d_inputs;
    }
    switch (l.archetype) {
      case Archetype::rnn: rnn_backward(l, layer, w, traces[layer], d_hidden, grad, d_in_ptr); break;
      case Archetype::lstm: lstm_backward(l, layer, w, traces[layer], d_hidden, grad, d_in_ptr); break;
      case Archetype::gru: gru_backward(l, layer, w, traces[layer], d_hidden, grad, d_in_ptr); break;
      case Archetype::mlp: break;
    }
    if (layer > 0) d_hidden = std::move(d_inputs);
  }
  return err * err;
}

}  // namespace predictchain::models
