#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace zrdiff {

// Faces of the simplex are subsets of the site set S = {0, ..., p-1},
// stored as bitmasks (site i <-> bit i). p stays small (<= ~10) so a
// 32-bit mask is plenty.
using FaceMask = std::uint32_t;

inline FaceMask face_mask(const std::vector<int>& sites) {
  FaceMask m = 0;
  for (int s : sites) m |= (FaceMask{1} << s);
  return m;
}

inline std::vector<int> face_sites(FaceMask mask) {
  std::vector<int> sites;
  for (int i = 0; mask >> i; ++i)
    if (mask & (FaceMask{1} << i)) sites.push_back(i);
  return sites;
}

inline int face_size(FaceMask mask) { return std::popcount(mask); }

inline bool face_contains(FaceMask mask, int site) {
  return (mask >> site) & 1u;
}

inline bool face_subset(FaceMask inner, FaceMask outer) {
  return (inner & ~outer) == 0;
}

inline FaceMask full_face(int p) { return (FaceMask{1} << p) - 1; }

// All faces with at least min_size sites, in increasing mask order.
inline std::vector<FaceMask> enumerate_faces(int p, int min_size) {
  std::vector<FaceMask> out;
  for (FaceMask m = 1; m < (FaceMask{1} << p); ++m)
    if (face_size(m) >= min_size) out.push_back(m);
  return out;
}

}  // namespace zrdiff
