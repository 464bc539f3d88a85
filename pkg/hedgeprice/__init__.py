# hedgeprice package

__all__ = [
	"census",
	"config",
	"errors",
	"lattice",
	"market_geometry",
	"payoffs",
	"pde",
	"pricing",
	"submodular",
]
