#include "neuralign/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace neuralign {

AdamState AdamState::init(const Dims& dims, const LearningRates& rates) {
  AdamState s;
  s.m = Gradients::zeros(dims);
  s.v = Gradients::zeros(dims);
  s.lr = rates;
  return s;
}

namespace {

void update_block(Matrix& theta, const Matrix& g, Matrix& m, Matrix& v, double lr,
                  double beta1, double beta2, double eps, double bc1, double bc2) {
  if (!theta.same_shape(g))
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double gi = g.data[i];
    m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
    v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
    const double mhat = m.data[i] / bc1;
    const double vhat = v.data[i] / bc2;
    theta.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

void adam_step(AlignmentModel& model, const Gradients& grads, AdamState& state) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.t));

  update_block(model.A, grads.A, state.m.A, state.v.A, state.lr.btm, state.beta1,
               state.beta2, state.eps, bc1, bc2);
  update_block(model.B, grads.B, state.m.B, state.v.B, state.lr.btm, state.beta1,
               state.beta2, state.eps, bc1, bc2);
  update_block(model.W_diff, grads.W_diff, state.m.W_diff, state.v.W_diff,
               state.lr.mapper, state.beta1, state.beta2, state.eps, bc1, bc2);
  update_block(model.b_diff, grads.b_diff, state.m.b_diff, state.v.b_diff,
               state.lr.mapper, state.beta1, state.beta2, state.eps, bc1, bc2);
  update_block(model.W_f, grads.W_f, state.m.W_f, state.v.W_f, state.lr.embedder,
               state.beta1, state.beta2, state.eps, bc1, bc2);
  update_block(model.b_f, grads.b_f, state.m.b_f, state.v.b_f, state.lr.embedder,
               state.beta1, state.beta2, state.eps, bc1, bc2);
}

}  // namespace neuralign
