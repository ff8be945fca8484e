from fractions import Fraction

from brickint import dsl, gallery
from brickint.geometry import Brick
from brickint.algorithms import directional, integrator


def main():
    # Intégrande x1 * x2 sur le carré unité [0,1] x [0,1]
    f = integrator.IntegrandSpec.from_function(
        dsl.parse("x1 * x2", ambient=Brick.unit(2))
    )

    # K-intégrale avec le calendrier m = 8, 16 et une tolérance de 1/1000
    result = integrator.k_integrate(f, Fraction(1, 1000), (8, 16))
    print(f"Intégrale : {result.value} (borne d'erreur {result.error_bound}, m = {result.m})")

    # Classification d'un saut en x1 = 1/2
    saut = dsl.parse("if x1 > 1/2 then 1 else 0", ambient=Brick.unit(1))
    point = (Fraction(1, 2),)
    print(f"Type de discontinuité : {directional.classify(saut, point, saut.ambient).kind.value}")

    # Fonction de Thomae : intégrable malgré une infinité de discontinuités
    thomae = gallery.resolve("thomae_sheet")
    decision = directional.decide_k_integrability(
        thomae, thomae.ambient, (2, 3), config=directional.DirectionalConfig(samples=16)
    )
    print(f"Verdict pour thomae_sheet : {decision.verdict.value}")


if __name__ == "__main__":
    main()
