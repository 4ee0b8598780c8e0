#pragma once

#include <string>

namespace fshe {

/// Library version, "major.minor.patch".
std::string library_version();

/// Version string of the FFT library the lattice transforms run on.
std::string fft_backend_version();

}  // namespace fshe
