#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gcr/model.hpp"

namespace gcr {

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

// One sample per row, header "x0,...,x{D-1}[,label]". Labels go in and out
// exactly as stored on the dataset.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);

// Header "index,label"; index counts samples from 0.
std::string labels_to_csv(const std::vector<int>& labels);

// Dense values, one matrix row per line, no header.
std::string matrix_to_csv(const Eigen::MatrixXd& m);

// Whole-file helpers. Binary mode so output bytes are platform-independent.
void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace gcr
