"""Matrix-product-state machinery: states, environments, DMRG and TDVP."""
