// JSON form of ClientHelloSpec: the probe pool file shared between probe
// generation and scanning. Code points are decimal integers, literal
// payloads lowercase hex, arrays keep their order.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tlsfp/wire.hpp"

namespace tlsfp::spec_io {

struct SpecFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string pool_to_json_text(const std::vector<wire::ClientHelloSpec>& pool);
std::vector<wire::ClientHelloSpec> pool_from_json_text(const std::string& text);

std::vector<wire::ClientHelloSpec> load_pool(const std::string& path);
void save_pool(const std::string& path, const std::vector<wire::ClientHelloSpec>& pool);

}  // namespace tlsfp::spec_io
