#pragma once

#include <string>

#include "hdre/network.hpp"

namespace hdre::nn {

// "NNCP1" magic, u32 LE manifest length, JSON manifest, then raw f32 little-endian
// buffers in manifest order. The manifest records the architecture and every
// tensor's name/shape/offset; loading validates all of it.
void save_checkpoint(Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

} // namespace hdre::nn
