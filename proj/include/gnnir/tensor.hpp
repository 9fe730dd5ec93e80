#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gnnir {

// Dense row-major tensor of doubles. 1-D shapes are vectors, 2-D are matrices;
// nothing here needs higher ranks.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> shape_in, std::vector<double> data_in);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    static Tensor vec(std::vector<double> values);
    static Tensor matrix(int rows, int cols, std::vector<double> values);
    static Tensor glorot_uniform(int rows, int cols, std::mt19937_64& rng);

    long long size() const { return static_cast<long long>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int rows() const;
    int cols() const;
    double& at(int i, int j);
    double at(int i, int j) const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;
};

// 53-bit mantissa draw in [0,1); stable across standard libraries.
double uniform01(std::mt19937_64& rng);

// Mixes a seed with stream tags so derived generators are independent.
uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0);

}  // namespace gnnir
