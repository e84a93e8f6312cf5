// SPDX-License-Identifier: Apache-2.0
#include "rdml/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rdml/rng.hpp"
#include "rdml/text.hpp"

namespace rdml {

StudentModel init_student(const std::vector<std::size_t>& layer_sizes,
                          std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("init_student: need at least 2 layer sizes");
  }
  for (std::size_t size : layer_sizes) {
    if (size == 0) {
      throw std::invalid_argument("init_student: layer sizes must be positive");
    }
  }
  StudentModel model;
  model.layer_sizes = layer_sizes;
  model.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const double limit =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) {
      v = rng.uniform(-limit, limit);
    }
    model.weights.push_back(Tensor({fan_in, fan_out}, std::move(w)));
    model.biases.push_back(Tensor::zeros({fan_out}));
  }
  return model;
}

Tensor forward(const StudentModel& model, const Tensor& x) {
  if (x.rank() != 2 || x.shape()[1] != model.input_size()) {
    throw std::invalid_argument("forward: input is not [n, input_size]");
  }
  const std::size_t n = x.shape()[0];
  Tensor h = x;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    h = add(matmul(h, model.weights[l]), repeat_rows(model.biases[l], n));
    if (l + 1 < model.layer_count()) {
      h = relu(h);
    }
  }
  return h;
}

std::vector<Tensor*> parameters(StudentModel& model) {
  std::vector<Tensor*> params;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    params.push_back(&model.weights[l]);
    params.push_back(&model.biases[l]);
  }
  return params;
}

std::vector<const Tensor*> parameters(const StudentModel& model) {
  std::vector<const Tensor*> params;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    params.push_back(&model.weights[l]);
    params.push_back(&model.biases[l]);
  }
  return params;
}

std::size_t parameter_count(const StudentModel& model) {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
    count += (model.layer_sizes[l] + 1) * model.layer_sizes[l + 1];
  }
  return count;
}

namespace {

void write_row(std::ostream& out, std::span<const double> values,
               std::size_t offset, std::size_t count) {
  for (std::size_t j = 0; j < count; ++j) {
    if (j > 0) {
      out << '\t';
    }
    out << format_double(values[offset + j]);
  }
  out << '\n';
}

[[noreturn]] void bad_checkpoint(const std::string& path,
                                 const std::string& what) {
  throw std::runtime_error("checkpoint '" + path + "': " + what);
}

std::vector<double> parse_row(const std::string& line, std::size_t count,
                              const std::string& path) {
  std::vector<std::string> tokens = split(line, '\t');
  if (tokens.size() != count) {
    bad_checkpoint(path, "expected " + std::to_string(count) + " values");
  }
  std::vector<double> values(count);
  for (std::size_t j = 0; j < count; ++j) {
    if (!try_parse_double(tokens[j], values[j])) {
      bad_checkpoint(path, "bad number '" + tokens[j] + "'");
    }
  }
  return values;
}

}  // namespace

void save_checkpoint(const StudentModel& model, const std::string& path) {
  std::ostringstream out;
  out << "rdml-checkpoint v1\n";
  out << "layers";
  for (std::size_t size : model.layer_sizes) {
    out << '\t' << size;
  }
  out << '\n';
  out << "seed\t" << model.seed << '\n';
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const std::size_t fan_in = model.layer_sizes[l];
    const std::size_t fan_out = model.layer_sizes[l + 1];
    out << 'W' << l << '\t' << fan_in << '\t' << fan_out << '\n';
    for (std::size_t i = 0; i < fan_in; ++i) {
      write_row(out, model.weights[l].values(), i * fan_out, fan_out);
    }
    out << 'b' << l << '\t' << fan_out << '\n';
    write_row(out, model.biases[l].values(), 0, fan_out);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) {
      bad_checkpoint(path, "cannot open for writing");
    }
    file << out.str();
    if (!file.flush()) {
      bad_checkpoint(path, "write failed");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    bad_checkpoint(path, "rename failed");
  }
}

StudentModel load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    bad_checkpoint(path, "cannot open");
  }
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(file, line)) {
      bad_checkpoint(path, std::string("missing ") + what);
    }
    return line;
  };

  if (next_line("magic header") != "rdml-checkpoint v1") {
    bad_checkpoint(path, "bad magic header");
  }

  std::vector<std::string> tokens = split(next_line("layers line"), '\t');
  if (tokens.size() < 3 || tokens[0] != "layers") {
    bad_checkpoint(path, "bad layers line");
  }
  std::vector<std::size_t> layer_sizes;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    unsigned long long size = 0;
    if (!try_parse_uint64(tokens[i], size) || size == 0) {
      bad_checkpoint(path, "bad layer size '" + tokens[i] + "'");
    }
    layer_sizes.push_back(static_cast<std::size_t>(size));
  }

  tokens = split(next_line("seed line"), '\t');
  unsigned long long seed = 0;
  if (tokens.size() != 2 || tokens[0] != "seed" ||
      !try_parse_uint64(tokens[1], seed)) {
    bad_checkpoint(path, "bad seed line");
  }

  StudentModel model;
  model.layer_sizes = layer_sizes;
  model.seed = seed;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const std::string w_header = "W" + std::to_string(l) + "\t" +
                                 std::to_string(fan_in) + "\t" +
                                 std::to_string(fan_out);
    if (next_line("weight header") != w_header) {
      bad_checkpoint(path, "bad weight header for layer " + std::to_string(l));
    }
    std::vector<double> w;
    w.reserve(fan_in * fan_out);
    for (std::size_t i = 0; i < fan_in; ++i) {
      std::vector<double> row = parse_row(next_line("weight row"), fan_out, path);
      w.insert(w.end(), row.begin(), row.end());
    }
    model.weights.push_back(Tensor({fan_in, fan_out}, std::move(w)));

    const std::string b_header =
        "b" + std::to_string(l) + "\t" + std::to_string(fan_out);
    if (next_line("bias header") != b_header) {
      bad_checkpoint(path, "bad bias header for layer " + std::to_string(l));
    }
    model.biases.push_back(
        Tensor({fan_out}, parse_row(next_line("bias row"), fan_out, path)));
  }
  if (std::getline(file, line) && !line.empty()) {
    bad_checkpoint(path, "trailing content");
  }
  return model;
}

}  // namespace rdml
