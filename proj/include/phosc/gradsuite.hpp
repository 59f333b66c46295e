#pragma once

// Finite-difference checks of every layer type and of both training
// objectives, shared by the test suites and the `gradcheck` command. All
// checks run in double precision.

#include <string>
#include <vector>

#include "phosc/model.hpp"
#include "phosc/net/gradcheck.hpp"

namespace phosc::gradsuite {

// Loss = fixed random linear functional of the network output; input
// gradients are checked alongside the parameters.
net::GradCheckReport check_net(const net::NetSpec& spec, const net::Shape& input_shape, std::uint64_t seed,
                               std::size_t samples = 200);

// One conv layer on 8 x 40 images, tiny heads.
model::ArchConfig tiny_arch();

// PhoscNet forward + multi-task loss (lambda 1 / 4.5) against the signature of word.
net::GradCheckReport check_phoscnet(std::uint64_t seed, const std::string& word = "dog", std::size_t samples = 200);
// PhoscCtc forward + CTC loss of label.
net::GradCheckReport check_ctc(std::uint64_t seed, const std::string& label = "cab", std::size_t samples = 200);

struct NamedReport {
  std::string name;
  net::GradCheckReport report;
};

// conv, dense, maxpool, spp, relu, sigmoid, tanh, softmax, height collapse,
// bilstm, and the two composite objectives.
std::vector<NamedReport> standard_suite(std::uint64_t seed = 1, std::size_t samples = 200);

}  // namespace phosc::gradsuite
