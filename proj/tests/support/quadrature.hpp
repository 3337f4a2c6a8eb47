#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace testsupport {

// 32-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; mirrored).
inline const std::vector<std::pair<double, double>>& gl32_half() {
  static const std::vector<std::pair<double, double>> half = {
      {0.0483076656877383162348126, 0.0965400885147278005667648},
      {0.1444719615827964934851864, 0.0956387200792748594190820},
      {0.2392873622521370745446032, 0.0938443990808045656391802},
      {0.3318686022821276497799168, 0.0911738786957638847128686},
      {0.4213512761306353453641194, 0.0876520930044038111427715},
      {0.5068999089322293900237475, 0.0833119242269467552221991},
      {0.5877157572407623290407455, 0.0781938957870703064717409},
      {0.6630442669302152009751152, 0.0723457941088485062253994},
      {0.7321821187402896803874267, 0.0658222227763618468376501},
      {0.7944837959679424069630973, 0.0586840934785355471452836},
      {0.8493676137325699701336930, 0.0509980592623761761961632},
      {0.8963211557660521239653072, 0.0428358980222266806568786},
      {0.9349060759377396891709191, 0.0342738629130214331026877},
      {0.9647622555875064307738119, 0.0253920653092620594557526},
      {0.9856115115452683354001750, 0.0162743947309056706051706},
      {0.9972638618494815635449811, 0.0070186100094700966004071}};
  return half;
}

inline double gauss_legendre(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double acc = 0.0;
  for (const auto& [x, w] : gl32_half()) acc += w * (f(c + h * x) + f(c - h * x));
  return h * acc;
}

/// Integrate over panels that grow geometrically away from the origin,
/// suitable for heavy-tailed one-dimensional densities.
inline double integrate_line(const std::function<double(double)>& f, double extent = 3000.0) {
  std::vector<double> knots{0.0};
  for (double x = 0.25; x < 12.0; x += 0.25) knots.push_back(x);
  for (double x = 12.0; x < extent; x *= 1.5) knots.push_back(x);
  knots.push_back(extent);
  double acc = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    acc += gauss_legendre(f, knots[i - 1], knots[i]);
    acc += gauss_legendre(f, -knots[i], -knots[i - 1]);
  }
  return acc;
}

}  // namespace testsupport
