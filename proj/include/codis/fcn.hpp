#ifndef CODIS_FCN_HPP
#define CODIS_FCN_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "codis/types.hpp"

namespace codis::fcn {

// Three conv blocks (kernels 16/10/6, batch norm, ReLU), global average
// pooling, dense layer, softmax over counts 1..4.
struct Architecture {
  std::array<int, 3> kernels{16, 10, 6};
  std::array<int, 3> filters{128, 256, 128};
  int input_len = 0;
  std::array<int, 4> classes{1, 2, 3, 4};
  bool normalize = false;  // divide by max|x| before padding

  int channels(int block) const { return block == 0 ? 1 : filters[block - 1]; }
  int out_len(int block) const {
    int t = input_len;
    for (int b = 0; b <= block; ++b) t -= kernels[b] - 1;
    return t;
  }
  void validate() const;
};

// Flat trainable parameters plus flat batch-norm running statistics; layouts
// are fixed by the architecture so the two vectors serialize as-is.
struct FcnModel {
  Architecture arch;
  Eigen::VectorXd params;
  Eigen::VectorXd stats;

  // parameter slices
  Eigen::Map<Eigen::MatrixXd> conv_w(int block);
  Eigen::Map<const Eigen::MatrixXd> conv_w(int block) const;
  Eigen::Map<Eigen::VectorXd> conv_b(int block);
  Eigen::Map<const Eigen::VectorXd> conv_b(int block) const;
  Eigen::Map<Eigen::VectorXd> bn_gamma(int block);
  Eigen::Map<const Eigen::VectorXd> bn_gamma(int block) const;
  Eigen::Map<Eigen::VectorXd> bn_beta(int block);
  Eigen::Map<const Eigen::VectorXd> bn_beta(int block) const;
  Eigen::Map<Eigen::MatrixXd> dense_w();  // filters x classes
  Eigen::Map<const Eigen::MatrixXd> dense_w() const;
  Eigen::Map<Eigen::VectorXd> dense_b();
  Eigen::Map<const Eigen::VectorXd> dense_b() const;
  Eigen::Map<Eigen::VectorXd> bn_mean(int block);
  Eigen::Map<const Eigen::VectorXd> bn_mean(int block) const;
  Eigen::Map<Eigen::VectorXd> bn_var(int block);
  Eigen::Map<const Eigen::VectorXd> bn_var(int block) const;
};

FcnModel make_model(const Architecture& arch, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 64;
  int max_epochs = 500;
  double train_ratio = 0.8;
  bool shuffle_train = true;
  int num_trainings = 5;
  std::uint64_t seed = 0;
  std::array<int, 3> filters{128, 256, 128};
  bool normalize = false;
  int workers = 1;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainResult {
  FcnModel model;
  std::vector<EpochLog> log;
  double best_accuracy = 0.0;
  int best_epoch = 0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

// Appends Gaussian noise with mean/std estimated from the first 50 samples
// (or all available when shorter) until target_len.
Waveform pad_with_noise(const Waveform& x, std::size_t target_len, std::uint64_t seed);

// Normalization (if enabled) + pad/truncate to the model's input length.
Eigen::VectorXd prepare_input(const FcnModel& m, const Waveform& x);

// Inference forward: conv->BN(running stats)->ReLU x3, GAP, dense, softmax.
// x must already have the model's input length.
Eigen::Vector4d forward(const FcnModel& m, const Eigen::VectorXd& x);
Eigen::Vector4d forward(const FcnModel& m, const Waveform& x);

// argmax with ties broken toward the smaller count
int predict_count(const FcnModel& m, const Waveform& x);

// One-step upward adjustment when the observed peak count is implausibly
// high for the predicted class.
int refine(int count, std::size_t peaks);

// Dense-weight projection of the last conv block's activations, linearly
// upsampled to the input length.
std::vector<double> class_activation_map(const FcnModel& m, const Waveform& x, int class_label);

// 80:20 stratified training with Adam on the NLL; returns the best held-out
// accuracy checkpoint and the per-epoch log. Deterministic given cfg.seed.
TrainResult train(const std::vector<LabeledSignal>& data, const TrainConfig& cfg);

// Max relative error between analytic parameter gradients of the batch NLL
// (training mode) and central finite differences with step 1e-5.
double gradient_check(const FcnModel& m, const std::vector<Eigen::VectorXd>& batch,
                      const std::vector<int>& labels);

// Valid 1D convolution: input (T x C), weights (C*k x F) -> (T-k+1 x F).
Eigen::MatrixXd conv1d_valid(const Eigen::MatrixXd& input, const Eigen::MatrixXd& w,
                             const Eigen::VectorXd& bias, int kernel);

void save_model(const std::string& path, const FcnModel& m);
FcnModel load_model(const std::string& path);

}  // namespace codis::fcn

#endif
