#pragma once

#include "ecgseg/adam.h"
#include "ecgseg/unet.h"

#include <filesystem>
#include <iosfwd>
#include <optional>

// Checkpoint container, version 1. All integers and doubles little-endian.
//
//   magic      8 bytes  "ECGSEGCK"
//   version    u32      1
//   config     u32 x 12 encoder widths[4], bottleneck, n_classes, conv kernel,
//                       conv padding, deconv kernel, deconv stride, deconv padding,
//                       final kernel
//              u64      init seed
//   step       u64      optimizer steps taken
//   optimizer  u8       1 if Adam state follows, else 0
//              f64 x 4  learning rate, beta1, beta2, epsilon   (if present)
//              u64      Adam step counter                      (if present)
//   count      u32      number of blobs
//   blob       u16 name length, name bytes, u32 x 3 shape, f64 x prod(shape)
//
// Blobs are the parameters (e.g. "enc1.conv1.weight"), batch-norm running
// statistics ("enc1.bn1.running_mean") and, with optimizer state, the Adam
// moments ("adam.m:<param>", "adam.v:<param>").
namespace ecgseg {

struct Checkpoint {
    UNet model;
    std::optional<nn::Adam> optimizer;
};

void save_checkpoint(std::ostream& out, const UNet& model, const nn::Adam* optimizer = nullptr);
void save_checkpoint(const std::filesystem::path& path, const UNet& model, const nn::Adam* optimizer = nullptr);

// Throws CheckpointError on bad magic, unknown version, truncation or
// inconsistent contents.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Loads weights into an existing model; every blob must match the model's
// shapes and the configs must agree. Errors name the offending layer path.
void load_weights_into(std::istream& in, UNet& model);

} // namespace ecgseg
