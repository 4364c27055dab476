"""Network modules: layers, Res2Net blocks, CBAM attention and VeloNet."""
