// Short tour of the divergence library: values, dual maps, and the two
// geometric identities, printed for a handful of concrete points.

#include <cstdio>

#include "wts/bregman.hpp"
#include "wts/rng.hpp"
#include "wts/sampling.hpp"

using namespace wts;

int main() {
  auto v1 = [](double a) {
    Vec v(1);
    v[0] = a;
    return v;
  };

  auto neb = Generator::neg_entropy_binary();
  std::printf("binary negative entropy at p=0.5: %.6f\n",
              neb.value(v1(0.5)));
  std::printf("dual map (logit) at p=0.8:        %.6f\n",
              neb.dual_map(v1(0.8))[0]);
  std::printf("KL(0.2 || 0.7) via divergence:    %.6f\n",
              neb.divergence(v1(0.2), v1(0.7)));
  std::printf("duality residual at (0.2, 0.7):   %.3e\n",
              neb.duality_residual(v1(0.2), v1(0.7)));

  std::printf("\nlaw of cosines residual, random triples:\n");
  for (const auto& gen :
       {Generator::l2(3), Generator::neg_entropy_multiclass(4),
        Generator::logistic(2), Generator::itakura_saito(2)}) {
    RngStream rng = RngStream::derive(7, to_string(gen.kind()));
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      Vec x = random_interior_point(gen, rng);
      Vec y = random_interior_point(gen, rng);
      Vec z = random_interior_point(gen, rng);
      worst = std::max(worst, std::abs(gen.law_of_cosines_residual(x, y, z)));
    }
    std::printf("  %-22s %.3e\n", to_string(gen.kind()).c_str(), worst);
  }
  return 0;
}
