#include "gnnir/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gnnir {

namespace {

long long shape_size(const std::vector<int>& shape) {
    long long total = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative tensor dimension");
        total *= d;
    }
    return total;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
    if (shape_size(shape) != static_cast<long long>(data.size()))
        throw std::invalid_argument("tensor data does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    long long n = shape_size(shape);
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(n), 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.data) x = value;
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vec(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
    Tensor t = zeros({rows, cols});
    double limit = std::sqrt(6.0 / (rows + cols));
    for (double& x : t.data) x = (2.0 * uniform01(rng) - 1.0) * limit;
    return t;
}

int Tensor::rows() const {
    if (ndim() != 2) throw std::logic_error("rows() requires a 2-D tensor, got " + shape_str());
    return shape[0];
}

int Tensor::cols() const {
    if (ndim() != 2) throw std::logic_error("cols() requires a 2-D tensor, got " + shape_str());
    return shape[1];
}

double& Tensor::at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
double Tensor::at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); i++) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
    // splitmix64 over the concatenated words
    uint64_t x = seed;
    for (uint64_t w : {a, b, c}) {
        x += 0x9e3779b97f4a7c15ULL + w;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        x = z ^ (z >> 31);
    }
    return x;
}

}  // namespace gnnir
