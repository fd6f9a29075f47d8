#pragma once

#include <filesystem>
#include <iosfwd>

#include "turing/pipeline.hpp"

namespace turing {

/// Binary model layout (all integers and floats little-endian):
///   "TMOD", u32 version (1), u8 method (0 svr, 1 ovk, 2 ffnn),
///   u32 target count, u32 target indices, f64 normalization maxima,
///   f64 radius, u32 spacing, u32 bins, f64 r_max, u8 use_cm, u64 split seed,
///   f64 validation NRMSE, then the method payload:
///   svr:  u32 model count; per model u8 kernel, f64 gamma, f64 lambda, f64 epsilon tube,
///         f64 KKT residual, f64 objective, u32 n, u32 dim, n*dim f64 inputs, n f64 alphas
///   ovk:  u8 kernel, f64 gamma, f64 output gamma, f64 lambda, f64 eps_reg,
///         f64 GMRES residual, u32 n, u32 input dim, u32 output dim, inputs, targets,
///         n*n f64 T_n and n*n f64 U (column-major)
///   ffnn: u32 input dim, u32 output dim, u32 hidden count, u32 widths,
///         u32 parameter count, f64 parameters
void write_model(std::ostream& out, const TrainedModel& model);
TrainedModel read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace turing
