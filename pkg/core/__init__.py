# Core package for constrained quality-diversity search (FI-2Pop, SIFA, CMAP-Elites)
