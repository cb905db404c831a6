#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qnode/expr/experiments.hpp"
#include "qnode/expr/svg.hpp"

namespace qnode::expr {

// CSV tables. Values are written with shortest round-trip formatting so
// identical inputs give byte-identical files.
//
//   generated.csv        sample,index,time,window,x,y,z,norm
//   generated_latent.csv sample,index,time,h0..h{L-1}
//   trajectory_<i>.csv   index,time,window,x,y,z,norm
//   hup.csv              trajectory,time,window,var_x,var_z,sum,satisfied,ensemble_var_x,ensemble_var_z
//   hup_min.csv          time,window,min_sum
//   interpolation.csv    entry,s,index,time,window,x,y,z,norm
//   interpolation_latent.csv entry,s,index,time,h0..h{L-1}
//   latent.csv           trajectory,index,time,h0..h{L-1}
//   extrapolation.csv    trajectory,index,time,window,x,y,z,true_x,true_y,true_z

void write_generated_csv(const std::filesystem::path& dir, const GeneratedSet& set);
void write_hup_csv(const std::filesystem::path& dir, const HupResult& hup, double training_end);
void write_interpolation_csv(const std::filesystem::path& path, const std::filesystem::path& latent_path,
                             const InterpolationResult& result, std::size_t training_points);
void write_latent_csv(const std::filesystem::path& path,
                      std::span<const lode::LatentTrajectory> latents);
void write_extrapolation_csv(const std::filesystem::path& path,
                             std::span<const ExtrapolationReport> reports);

std::string window_name(std::size_t index, std::size_t training_points);

// Figures.
std::string generated_figure(const GeneratedSet& set);
std::string generated_norm_figure(const GeneratedSet& set);
std::string hup_figure(const HupResult& hup, double training_end);
std::string interpolation_figure(const InterpolationResult& result, std::size_t training_points);
std::string latent_figure(std::span<const lode::LatentTrajectory> latents, std::size_t max_rows = 36);
std::string extrapolation_figure(std::span<const ExtrapolationReport> reports);

}  // namespace qnode::expr
