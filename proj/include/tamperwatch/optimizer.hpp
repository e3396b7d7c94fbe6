#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tamperwatch/conv_lstm.hpp"

namespace tamperwatch {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
};

/// First/second moment accumulators, one pair per parameter array.
template <typename Scalar>
struct AdamStateT {
  std::vector<ArrayX<Scalar>> m;
  std::vector<ArrayX<Scalar>> v;
  long long t = 0;
};

using AdamState = AdamStateT<double>;

/// A named view of one parameter array and its gradient.
template <typename Scalar>
struct ParamRefT {
  std::string name;
  ArrayX<Scalar>* value;
  ArrayX<Scalar>* grad;
};

using ParamRef = ParamRefT<double>;

/// Adaptive-moment descent over an arbitrary list of parameter arrays. The
/// global gradient norm is clipped to hyper.clip_norm before the update.
/// Non-finite gradients raise NumericError naming the offending array.
template <typename Scalar>
void optimizer_step(std::vector<ParamRefT<Scalar>>& refs, AdamStateT<Scalar>& state,
                    const AdamHyper& hyper) {
  if (state.m.empty()) {
    state.m.reserve(refs.size());
    state.v.reserve(refs.size());
    for (const auto& r : refs) {
      state.m.push_back(ArrayX<Scalar>::Zero(r.value->size()));
      state.v.push_back(ArrayX<Scalar>::Zero(r.value->size()));
    }
  }
  if (state.m.size() != refs.size()) {
    throw InternalError("optimizer_step: state holds " + std::to_string(state.m.size()) +
                        " arrays but " + std::to_string(refs.size()) + " were given");
  }

  double sq_norm = 0.0;
  for (const auto& r : refs) {
    if (!r.grad->isFinite().all()) {
      throw NumericError("optimizer_step: non-finite gradient in parameter " + r.name);
    }
    sq_norm += static_cast<double>(r.grad->square().sum());
  }
  double scale = 1.0;
  if (hyper.clip_norm > 0.0) {
    const double norm = std::sqrt(sq_norm);
    if (norm > hyper.clip_norm) scale = hyper.clip_norm / norm;
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    const ArrayX<Scalar> g = (*refs[i].grad) * static_cast<Scalar>(scale);
    m = static_cast<Scalar>(hyper.beta1) * m + static_cast<Scalar>(1.0 - hyper.beta1) * g;
    v = static_cast<Scalar>(hyper.beta2) * v + static_cast<Scalar>(1.0 - hyper.beta2) * g.square();
    *refs[i].value -= static_cast<Scalar>(hyper.lr) *
                      (m / static_cast<Scalar>(bc1)) /
                      ((v / static_cast<Scalar>(bc2)).sqrt() + static_cast<Scalar>(hyper.epsilon));
  }
}

/// Cell-level convenience: one Adam step over every array of a ConvLSTM cell.
template <typename Scalar>
void optimizer_step(ConvLstmCellParamsT<Scalar>& params, GradientBundleT<Scalar>& grads,
                    AdamStateT<Scalar>& state, const AdamHyper& hyper) {
  std::vector<ParamRefT<Scalar>> refs;
  std::vector<ArrayX<Scalar>*> grad_arrays;
  grads.for_each_array([&](const char*, ArrayX<Scalar>& a) { grad_arrays.push_back(&a); });
  std::size_t i = 0;
  params.for_each_array([&](const char* name, ArrayX<Scalar>& a) {
    refs.push_back(ParamRefT<Scalar>{name, &a, grad_arrays[i++]});
  });
  optimizer_step(refs, state, hyper);
}

}  // namespace tamperwatch
