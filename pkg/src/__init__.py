# Voronoi 星座工具包 
