#pragma once

namespace cpwlab {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double speed_of_light = 299792458.0;       // m/s
inline constexpr double hbar = 1.054571817e-34;             // J s
inline constexpr double boltzmann = 1.380649e-23;           // J/K

}  // namespace cpwlab
