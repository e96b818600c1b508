"""SVG 模板模块 - 三类图形的 jinja2 模板"""

# 基本域 [0,1)² 上的测地线，底部为 f 剖面条带
GEODESIC_FIGURE = """<svg xmlns="http://www.w3.org/2000/svg" width="{{ width }}" height="{{ height }}" viewBox="0 0 {{ width }} {{ height }}">
<!-- torus2poles {{ version }} -->
<title>{{ title }}</title>
<rect x="{{ left }}" y="{{ top }}" width="{{ size }}" height="{{ size }}" fill="#ffffff" stroke="#333333"/>
{% for band in plateau %}<rect x="{{ band.x }}" y="{{ top }}" width="{{ band.w }}" height="{{ size }}" fill="#fff3c4" stroke="none"/>
{% endfor %}{% for line in paths %}<polyline points="{{ line.points }}" fill="none" stroke="{{ line.color }}" stroke-width="1.2"/>
{% endfor %}<rect x="{{ left }}" y="{{ strip_top }}" width="{{ size }}" height="{{ strip }}" fill="#f7f7f7" stroke="#333333"/>
<polyline points="{{ profile }}" fill="none" stroke="#b03030" stroke-width="1.5"/>
<text x="{{ left }}" y="{{ top - 8 }}" font-family="sans-serif" font-size="12">{{ title }}</text>
<text x="{{ left + size / 2 }}" y="{{ height - 6 }}" font-family="sans-serif" font-size="11" text-anchor="middle">x mod 1</text>
<text x="12" y="{{ top + size / 2 }}" font-family="sans-serif" font-size="11" transform="rotate(-90 12 {{ top + size / 2 }})" text-anchor="middle">t mod 1</text>
</svg>
"""

# 位移函数热图，叠加 f 最大值平台
DISPLACEMENT_HEATMAP = """<svg xmlns="http://www.w3.org/2000/svg" width="{{ width }}" height="{{ height }}" viewBox="0 0 {{ width }} {{ height }}">
<!-- torus2poles {{ version }} -->
<title>{{ title }}</title>
{% for cell in cells %}<rect x="{{ cell.x }}" y="{{ cell.y }}" width="{{ cell.w }}" height="{{ cell.h }}" fill="{{ cell.color }}"/>
{% endfor %}{% for band in plateau %}<rect x="{{ band.x }}" y="{{ top }}" width="{{ band.w }}" height="{{ size }}" fill="none" stroke="#000000" stroke-width="1.5" stroke-dasharray="4 3"/>
{% endfor %}<rect x="{{ left }}" y="{{ top }}" width="{{ size }}" height="{{ size }}" fill="none" stroke="#333333"/>
<text x="{{ left }}" y="{{ top - 8 }}" font-family="sans-serif" font-size="12">{{ title }}</text>
<text x="{{ left }}" y="{{ height - 6 }}" font-family="sans-serif" font-size="11">min {{ vmin }}  max {{ vmax }}</text>
</svg>
"""

# 极限球面折线与中心射线
HOROSPHERE_FIGURE = """<svg xmlns="http://www.w3.org/2000/svg" width="{{ width }}" height="{{ height }}" viewBox="0 0 {{ width }} {{ height }}">
<!-- torus2poles {{ version }} -->
<title>{{ title }}</title>
<rect x="{{ left }}" y="{{ top }}" width="{{ size }}" height="{{ size }}" fill="#ffffff" stroke="#333333"/>
<line x1="{{ ray.x }}" y1="{{ ray.y1 }}" x2="{{ ray.x }}" y2="{{ ray.y2 }}" stroke="#b03030" stroke-width="1.5" stroke-dasharray="5 3"/>
{% for line in levels %}<polyline points="{{ line.points }}" fill="none" stroke="{{ line.color }}" stroke-width="1.4"/>
<text x="{{ line.label_x }}" y="{{ line.label_y }}" font-family="sans-serif" font-size="10">b = {{ line.level }}</text>
{% endfor %}<text x="{{ left }}" y="{{ top - 8 }}" font-family="sans-serif" font-size="12">{{ title }}</text>
<text x="{{ left }}" y="{{ height - 6 }}" font-family="sans-serif" font-size="11">x ∈ [{{ x_lo }}, {{ x_hi }}], t ∈ [{{ t_lo }}, {{ t_hi }}]</text>
</svg>
"""
