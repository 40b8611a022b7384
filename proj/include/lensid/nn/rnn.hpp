#pragma once

#include "lensid/ag/ops.hpp"
#include "lensid/nn/init.hpp"

namespace lensid::nn {

namespace detail {
template <class T>
ag::Var<T> one_minus(const ag::Var<T>& x) {
  return ag::add_scalar(ag::neg(x), T(1));
}
} // namespace detail

/// Single GRU step (reset gate applied to the previous state before the
/// recurrent matmul):
///   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
///   hc = tanh(x Wh + (r*h) Uh + bh), h' = z*h + (1-z)*hc
template <class T>
struct GRUCell {
  std::int64_t units = 0;
  ag::Var<T> wz, uz, bz, wr, ur, br, wh, uh, bh;

  GRUCell() = default;
  GRUCell(std::int64_t in_f, std::int64_t units_, Rng& rng) : units(units_) {
    auto input_w = [&] { return ag::parameter(glorot_uniform<T>({in_f, units}, in_f, units, rng)); };
    auto recur_w = [&] { return ag::parameter(orthogonal<T>(units, units, rng)); };
    auto bias = [&] { return ag::parameter(Tensor<T>({units})); };
    wz = input_w(); uz = recur_w(); bz = bias();
    wr = input_w(); ur = recur_w(); br = bias();
    wh = input_w(); uh = recur_w(); bh = bias();
  }

  ag::Var<T> step(const ag::Var<T>& x, const ag::Var<T>& h) const {
    auto z = ag::sigmoid(ag::add_rowvec(ag::add(ag::matmul(x, wz), ag::matmul(h, uz)), bz));
    auto r = ag::sigmoid(ag::add_rowvec(ag::add(ag::matmul(x, wr), ag::matmul(h, ur)), br));
    auto hc = ag::tanh_op(
        ag::add_rowvec(ag::add(ag::matmul(x, wh), ag::matmul(ag::mul(r, h), uh)), bh));
    return ag::add(ag::mul(z, h), ag::mul(detail::one_minus(z), hc));
  }

  void params(const std::string& p, NamedParams<T>& out) const {
    out.emplace_back(join_name(p, "wz"), wz); out.emplace_back(join_name(p, "uz"), uz);
    out.emplace_back(join_name(p, "bz"), bz); out.emplace_back(join_name(p, "wr"), wr);
    out.emplace_back(join_name(p, "ur"), ur); out.emplace_back(join_name(p, "br"), br);
    out.emplace_back(join_name(p, "wh"), wh); out.emplace_back(join_name(p, "uh"), uh);
    out.emplace_back(join_name(p, "bh"), bh);
  }
};

/// Single LSTM step; the forget-gate bias starts at 1.
template <class T>
struct LSTMCell {
  std::int64_t units = 0;
  ag::Var<T> wi, ui, bi, wf, uf, bf, wg, ug, bg, wo, uo, bo;

  LSTMCell() = default;
  LSTMCell(std::int64_t in_f, std::int64_t units_, Rng& rng) : units(units_) {
    auto input_w = [&] { return ag::parameter(glorot_uniform<T>({in_f, units}, in_f, units, rng)); };
    auto recur_w = [&] { return ag::parameter(orthogonal<T>(units, units, rng)); };
    auto bias = [&] { return ag::parameter(Tensor<T>({units})); };
    wi = input_w(); ui = recur_w(); bi = bias();
    wf = input_w(); uf = recur_w(); bf = ag::parameter(Tensor<T>::ones({units}));
    wg = input_w(); ug = recur_w(); bg = bias();
    wo = input_w(); uo = recur_w(); bo = bias();
  }

  struct State {
    ag::Var<T> h, c;
  };

  State step(const ag::Var<T>& x, const State& s) const {
    auto gate = [&](const ag::Var<T>& w, const ag::Var<T>& u, const ag::Var<T>& b) {
      return ag::add_rowvec(ag::add(ag::matmul(x, w), ag::matmul(s.h, u)), b);
    };
    auto i = ag::sigmoid(gate(wi, ui, bi));
    auto f = ag::sigmoid(gate(wf, uf, bf));
    auto g = ag::tanh_op(gate(wg, ug, bg));
    auto o = ag::sigmoid(gate(wo, uo, bo));
    auto c = ag::add(ag::mul(f, s.c), ag::mul(i, g));
    return {ag::mul(o, ag::tanh_op(c)), c};
  }

  void params(const std::string& p, NamedParams<T>& out) const {
    out.emplace_back(join_name(p, "wi"), wi); out.emplace_back(join_name(p, "ui"), ui);
    out.emplace_back(join_name(p, "bi"), bi); out.emplace_back(join_name(p, "wf"), wf);
    out.emplace_back(join_name(p, "uf"), uf); out.emplace_back(join_name(p, "bf"), bf);
    out.emplace_back(join_name(p, "wg"), wg); out.emplace_back(join_name(p, "ug"), ug);
    out.emplace_back(join_name(p, "bg"), bg); out.emplace_back(join_name(p, "wo"), wo);
    out.emplace_back(join_name(p, "uo"), uo); out.emplace_back(join_name(p, "bo"), bo);
  }
};

enum class RnnKind { gru, lstm, bigru, bilstm };

inline bool rnn_is_bidirectional(RnnKind k) {
  return k == RnnKind::bigru || k == RnnKind::bilstm;
}
inline bool rnn_is_lstm(RnnKind k) { return k == RnnKind::lstm || k == RnnKind::bilstm; }

/// Recurrent layer over (N, T, F) returning the full sequence
/// (N, T, units) or (N, T, 2*units) when bidirectional.
template <class T>
struct Rnn {
  RnnKind kind = RnnKind::gru;
  std::int64_t units = 0;
  GRUCell<T> gru_f, gru_b;
  LSTMCell<T> lstm_f, lstm_b;

  Rnn() = default;
  Rnn(RnnKind kind_, std::int64_t in_f, std::int64_t units_, Rng& rng)
      : kind(kind_), units(units_) {
    if (rnn_is_lstm(kind)) {
      lstm_f = LSTMCell<T>(in_f, units, rng);
      if (rnn_is_bidirectional(kind)) lstm_b = LSTMCell<T>(in_f, units, rng);
    } else {
      gru_f = GRUCell<T>(in_f, units, rng);
      if (rnn_is_bidirectional(kind)) gru_b = GRUCell<T>(in_f, units, rng);
    }
  }

  std::int64_t out_features() const { return rnn_is_bidirectional(kind) ? 2 * units : units; }

  ag::Var<T> forward(const ag::Var<T>& x) const {
    check(x->value.rank() == 3, ErrorKind::shape, "rnn: input must be (N,T,F)");
    const std::int64_t steps = x->value.dim(1);
    std::vector<ag::Var<T>> fwd = run_direction(x, false);
    if (!rnn_is_bidirectional(kind)) return ag::stack_time(fwd);
    std::vector<ag::Var<T>> bwd = run_direction(x, true);
    std::vector<ag::Var<T>> both(static_cast<std::size_t>(steps));
    for (std::int64_t t = 0; t < steps; ++t)
      both[static_cast<std::size_t>(t)] = ag::concat_axis1(
          fwd[static_cast<std::size_t>(t)], bwd[static_cast<std::size_t>(t)]);
    return ag::stack_time(both);
  }

  void params(const std::string& p, NamedParams<T>& out) const {
    if (rnn_is_lstm(kind)) {
      lstm_f.params(join_name(p, "fwd"), out);
      if (rnn_is_bidirectional(kind)) lstm_b.params(join_name(p, "bwd"), out);
    } else {
      gru_f.params(join_name(p, "fwd"), out);
      if (rnn_is_bidirectional(kind)) gru_b.params(join_name(p, "bwd"), out);
    }
  }

private:
  std::vector<ag::Var<T>> run_direction(const ag::Var<T>& x, bool reverse) const {
    const std::int64_t n = x->value.dim(0), steps = x->value.dim(1);
    std::vector<ag::Var<T>> out(static_cast<std::size_t>(steps));
    if (rnn_is_lstm(kind)) {
      const LSTMCell<T>& cell = reverse ? lstm_b : lstm_f;
      typename LSTMCell<T>::State s{ag::constant(Tensor<T>({n, units})),
                                    ag::constant(Tensor<T>({n, units}))};
      for (std::int64_t i = 0; i < steps; ++i) {
        const std::int64_t t = reverse ? steps - 1 - i : i;
        s = cell.step(ag::slice_time(x, t), s);
        out[static_cast<std::size_t>(t)] = s.h;
      }
    } else {
      const GRUCell<T>& cell = reverse ? gru_b : gru_f;
      ag::Var<T> h = ag::constant(Tensor<T>({n, units}));
      for (std::int64_t i = 0; i < steps; ++i) {
        const std::int64_t t = reverse ? steps - 1 - i : i;
        h = cell.step(ag::slice_time(x, t), h);
        out[static_cast<std::size_t>(t)] = h;
      }
    }
    return out;
  }
};

inline RnnKind rnn_kind_from_string(const std::string& s) {
  if (s == "GRU" || s == "gru") return RnnKind::gru;
  if (s == "LSTM" || s == "lstm") return RnnKind::lstm;
  if (s == "BiGRU" || s == "bigru") return RnnKind::bigru;
  if (s == "BiLSTM" || s == "bilstm") return RnnKind::bilstm;
  throw ConfigError("unknown rnn kind: " + s);
}

inline std::string to_string(RnnKind k) {
  switch (k) {
    case RnnKind::gru: return "GRU";
    case RnnKind::lstm: return "LSTM";
    case RnnKind::bigru: return "BiGRU";
    case RnnKind::bilstm: return "BiLSTM";
  }
  return "?";
}

} // namespace lensid::nn
